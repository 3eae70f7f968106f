# TollSim - 자율주행 시대 혼잡통행료 에이전트 기반 시뮬레이터
