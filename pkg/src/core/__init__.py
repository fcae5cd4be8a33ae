# Shared exceptions and scenario configuration
