import sys

from run_scripts.run_formulas import run_formulas
from run_scripts.run_limit_sample import run_limit_sample
from run_scripts.run_simulate import run_simulate
from run_scripts.run_verify import run_verify
from utils.arguments import Args
from utils.config import ExperimentConfig
from utils.errors import (EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RESOURCE_ERROR, ConfigError, DomainError,
                          ResourceError)
from utils.run_utils import get_logger

RUNNERS = {
    'simulate': run_simulate,
    'limit-sample': run_limit_sample,
    'formulas': run_formulas,
    'verify': run_verify,
}


def load_config(parser, args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    return cfg.apply_overrides(**parser.config_overrides(args))


def config_command(command_args):
    """
    `config print-defaults` prints the built-in configuration, `config validate PATH` checks a file.
    """
    if command_args == ['print-defaults']:
        print(ExperimentConfig().to_json())
    elif len(command_args) == 2 and command_args[0] == 'validate':
        ExperimentConfig.load(command_args[1]).validate()
        print(f'{command_args[1]} is valid.')
    else:
        raise ConfigError(f'Expected `config print-defaults` or `config validate PATH`, got {command_args}')
    return EXIT_OK


def main(argv=None):
    parser = Args()
    args = parser.parse_args(argv)
    logger = get_logger(name='main')

    try:
        cfg = load_config(parser, args)
        if args.command == 'config':
            return config_command(args.command_args)
        if args.command_args:
            raise ConfigError(f'`{args.command}` takes no positional arguments, got {args.command_args}')
        exit_code, run_path = RUNNERS[args.command](cfg)
        logger.info(f'{args.command} finished with exit code {exit_code}. Outputs in {run_path}')
        return exit_code
    except (ConfigError, DomainError) as e:
        logger.error(f'Configuration error: {e}')
        return EXIT_CONFIG_ERROR
    except ResourceError as e:
        logger.error(f'Resource cap exceeded: {e} {e.info}')
        return EXIT_RESOURCE_ERROR


if __name__ == '__main__':
    sys.exit(main())
