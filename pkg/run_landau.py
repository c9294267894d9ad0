#!/usr/bin/env python3
"""
Main program to run Landau equation experiments.

"""
import sys

from landau_base.errors import ConfigError
from landau_base.simulation_runner import (EXIT_CONFIG, configure_logging, parse_simulation_args,
                                           run_simulation, setup_simulation)


def main():
    """Main entry point."""
    parser = parse_simulation_args("Solve the Landau equation and verify its qualitative properties")
    args = parser.parse_args()
    configure_logging(args.verbose)

    try:
        config = setup_simulation(args)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    result, status = run_simulation(config, args.config)

    if result is not None:
        result.print_details()
        print(f"\nResults saved to {config.out_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
