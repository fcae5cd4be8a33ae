# QKD-secured telemetry simulator
