# Perception pipeline, simulation, evaluation and experiment services
