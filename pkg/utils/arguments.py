import argparse

COMMANDS = ('simulate', 'limit-sample', 'formulas', 'verify', 'config')


class Args(argparse.ArgumentParser):
    """
    Defines global default arguments. Values left at None do not override the configuration file.
    """

    def __init__(self, **overrides):
        """
        Args:
            **overrides (dict, optional): Keyword arguments used to override default argument values
        """

        super().__init__(formatter_class=argparse.ArgumentDefaultsHelpFormatter)

        self.add_argument('command', choices=COMMANDS,
                          help='Which experiment to run. `config` takes `print-defaults` or `validate PATH`.')

        self.add_argument('command_args', nargs='*', default=[],
                          help='Extra arguments of the `config` command.')

        # Configuration parameters
        self.add_argument('--config', type=str, default=None,
                          help='Path to a JSON experiment configuration. Built-in defaults are used if omitted.')

        self.add_argument('--seed', type=int, default=None,
                          help='Master seed from which every replicate stream is derived.')

        self.add_argument('--threads', type=int, default=None,
                          help='Number of worker processes used for replicates.')

        self.add_argument('--out', dest='out_dir', type=str, default=None,
                          help='Root directory for run outputs. Each run gets a numbered sub-directory.')

        # Experiment parameters
        self.add_argument('--n', nargs='+', type=int, default=None,
                          help='Generation(s) to simulate.')

        self.add_argument('--replicates', type=int, default=None,
                          help='Number of replicates or limit samples.')

        self.add_argument('--k', type=int, default=None,
                          help='Number of upper order statistics recorded per replicate.')

        self.add_argument('--window', type=float, default=None,
                          help='Atoms with |x| at or below this level are discarded after scaling.')

        self.add_argument('--track-one-jump', action='store_true', default=None,
                          help='Also build the one-large-jump process for every replicate.')

        # Logging parameters
        self.add_argument('--verbose', action='store_true', default=None,
                          help='Log per-replicate progress instead of showing a progress bar.')

        # Override defaults with passed overrides
        self.set_defaults(**overrides)

    def config_overrides(self, args):
        keys = ('seed', 'threads', 'out_dir', 'n', 'replicates', 'k', 'window', 'track_one_jump', 'verbose')
        return {key: getattr(args, key) for key in keys}
