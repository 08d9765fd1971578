"""INI run configuration for the command line.

Keys of the ``[run]`` block map to unprefixed options, every other block
``[name]`` maps ``key`` to the option ``--name-key``. The parsed file
becomes click's ``default_map``, so command-line values override the file
and the file overrides built-in defaults.
"""
import configparser
import logging
import os

import click

from rangeflow import error
from rangeflow.utils import config_digest

logger = logging.getLogger(__name__)

SECTIONS = ('run', 'model', 'data', 'flow', 'optimizer', 'solver', 'eval')
# left out of the digest: they do not change any output value
UNHASHED = ('config', 'verbose', 'out', 'progress')


def read_config(path):
    """Returns the file's keys flattened to click parameter names.
    """
    if not os.path.exists(path):
        raise error.DataError('config file {} does not exist'.format(path))
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as e:
        raise error.DataError('cannot parse config file {}: {}'.format(path, e))
    flat = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise click.BadParameter('unknown block [{}] in {}; choose from {}'.format(
                section, path, ', '.join(SECTIONS)), param_hint='--config')
        for key, value in parser.items(section):
            name = key.replace('-', '_')
            flat[name if section == 'run' else '{}_{}'.format(section, name)] = value
    return flat


def load_config(ctx, param, value):
    """Eager click callback installing the file as the command's defaults.

    Keys that the command does not accept are ignored with a debug log line,
    so one file can serve every command.
    """
    if not value:
        return value
    flat = read_config(value)
    known = {p.name for p in ctx.command.params}
    for key in sorted(set(flat) - known):
        logger.debug('%s: %s does not use %s', value, ctx.command.name, key)
    defaults = dict(ctx.default_map or {})
    defaults.update((k, v) for k, v in flat.items() if k in known)
    ctx.default_map = defaults
    return value


def run_digest(params):
    """Digest of a command's resolved parameters.
    """
    return config_digest({k: v for k, v in params.items() if k not in UNHASHED and v is not None})
