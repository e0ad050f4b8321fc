# Command-line subcommands: run, sweep, ablate, scores, validate
