# Core substrate: geometry, configuration loading, seeding, logging, errors
