"""Command line for training, sampling and evaluating rectified flows.

Exit codes: 0 success, 1 usage or stage error, 2 data or format error,
3 numerical failure.
"""
import logging
import os
import sys
import time

import click
from click.core import ParameterSource
import numpy as np

from rangeflow import data, error, nets
from rangeflow.config import load_config, run_digest
from rangeflow.core.tensor import set_default_dtype
from rangeflow.eval import (
    bev_histogram, curvature as curvature_profile, jsd, mean_histogram, mmd, nfe_sweep, sliced_w2,
    write_metric_report,
)
from rangeflow.flow import (
    PairDataset, TimeDist, distill as distill_model, generate_reflow_pairs, generator_digest, load_model,
    save_model, train_1rf, train_reflow,
)
from rangeflow.lidar import (
    DEFAULT_X_MAX, BeamTable, ClampCounter, from_model_space, project, read_point_cloud, read_range_image,
    read_range_image_dir, to_model_space, unproject, write_point_cloud, write_range_image,
)
from rangeflow.ode import SolverSpec, draw_latents, generate, invert as invert_states, sample as sample_states, slerp
from rangeflow.utils import read_states_csv, write_manifest, write_states_csv

logger = logging.getLogger('rangeflow')

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

PAIR_BATCH = 1024


def _fail(exc, code):
    click.echo('Error: {}'.format(exc), err=True)
    sys.exit(code)


class FlowGroup(click.Group):
    """Group mapping library errors to the documented exit codes.
    """

    def main(self, args=None, prog_name=None, complete_var=None, **extra):
        extra['standalone_mode'] = False
        try:
            code = super(FlowGroup, self).main(args=args, prog_name=prog_name, complete_var=complete_var, **extra)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo('Aborted!', err=True)
            sys.exit(EXIT_USAGE)
        except (error.StageError, error.InvalidArgument, error.Unregistered) as e:
            _fail(e, EXIT_USAGE)
        except (error.DataError, error.ShapeError) as e:
            _fail(e, EXIT_DATA)
        except (error.NumericalError, error.DomainError) as e:
            _fail(e, EXIT_NUMERICAL)
        sys.exit(code if isinstance(code, int) else 0)


# Option groups
# ----------------------------

def run_options(f):
    f = click.option('-v', '--verbose', count=True, help='Repeat for debug logging')(f)
    f = click.option('--progress/--no-progress', default=True, help='Show progress bars')(f)
    f = click.option('--precision', type=click.Choice(['64', '32']), default='64',
                     help='Floating-point width of model arithmetic')(f)
    f = click.option('--out', default='runs', type=click.Path(file_okay=False),
                     help='Directory receiving every output file')(f)
    f = click.option('--seed', type=int, required=True, help='Seed of every random draw')(f)
    f = click.option('--config', type=click.Path(dir_okay=False), callback=load_config, is_eager=True,
                     help='INI file of option defaults')(f)
    return f


def model_options(f):
    f = click.option('--model-kind', type=click.Choice(['auto', 'mlp', 'hourglass']), default='auto',
                     help='Velocity network; auto picks hourglass for range images')(f)
    f = click.option('--model-widths', default='', help='Comma-separated widths (network default if empty)')(f)
    f = click.option('--model-activation', type=click.Choice(['tanh', 'gelu']), default='tanh')(f)
    f = click.option('--model-depth', type=click.IntRange(min=1), default=2, help='Hourglass blocks per stage')(f)
    f = click.option('--model-time-dim', type=click.IntRange(min=2), default=32)(f)
    f = click.option('--model-ape/--model-no-ape', default=True, help='Absolute position bias')(f)
    return f


def data_options(f):
    f = click.option('--data-name', default='eight-gaussians',
                     help='Registered dataset id, a states .csv or a directory of .rimg files')(f)
    f = click.option('--data-count', type=click.IntRange(min=1), default=10000,
                     help='Samples drawn from a registered dataset')(f)
    f = click.option('--data-x-max', type=float, default=DEFAULT_X_MAX, help='Maximum range in meters')(f)
    return f


def optimizer_options(f):
    f = click.option('--optimizer-steps', type=click.IntRange(min=0), default=20000)(f)
    f = click.option('--optimizer-batch-size', type=click.IntRange(min=1), default=256)(f)
    f = click.option('--optimizer-lr', type=float, default=1e-3)(f)
    return f


def solver_options(method='euler', steps=None):
    def decorate(f):
        f = click.option('--solver-method', type=click.Choice(['euler', 'midpoint', 'dopri5', 'adaptive-rk45']),
                         default=method)(f)
        f = click.option('--solver-steps', type=click.IntRange(min=1), default=steps,
                         help='Fixed step count; adaptive dopri5 when omitted')(f)
        f = click.option('--solver-atol', type=float, default=1e-5)(f)
        f = click.option('--solver-rtol', type=float, default=1e-5)(f)
        return f
    return decorate


# Helpers
# ----------------------------

def setup_run(ctx, params):
    """Configures logging and precision, creates the output directory and
    returns the run's config digest.
    """
    level = logging.DEBUG if params['verbose'] > 0 else logging.INFO
    logging.basicConfig(format='%(asctime)s %(name)s %(levelname)s %(message)s')
    logger.setLevel(level)
    set_default_dtype(np.float32 if params['precision'] == '32' else np.float64)
    os.makedirs(params['out'], exist_ok=True)
    digest = run_digest(dict(params, command=ctx.info_name))
    logger.info('%s run %s -> %s', ctx.info_name, digest[:12], params['out'])
    return digest


def stage_file(stage):
    return stage.label.lower().replace('-', '')


def build_solver(params, direction='forward'):
    method = params['solver_method']
    steps = params['solver_steps']
    if method in ('euler', 'midpoint') and steps is None:
        raise click.BadParameter('{} needs --solver-steps'.format(method), param_hint='--solver-steps')
    if steps is None:
        return SolverSpec(method, atol=params['solver_atol'], rtol=params['solver_rtol'], direction=direction)
    return SolverSpec(method, steps=steps, direction=direction)


def distilled_solver(ctx, params, stage, direction='forward'):
    """A distilled model samples on its own grid unless steps were given."""
    if stage.distilled and ctx.get_parameter_source('solver_steps') == ParameterSource.DEFAULT:
        logger.info('%s model: sampling with %d Euler steps', stage.label, stage.k)
        return SolverSpec('euler', steps=stage.k, direction=direction)
    return build_solver(params, direction)


def is_registered(name):
    return any(s.id == name for s in data.registry.all())


def load_dataset(params):
    """Returns (states, beams) of the training data; beams is None for
    vector data.
    """
    name = params['data_name']
    if is_registered(name):
        spec = data.spec(name)
        kwargs = {'x_max': params['data_x_max']} if len(spec.data_shape) == 3 else {}
        states = spec.make(params['data_count'], params['seed'], **kwargs)
        beams = BeamTable.uniform(spec.data_shape[1]) if len(spec.data_shape) == 3 else None
        return states, beams
    if os.path.isdir(name):
        images = read_range_image_dir(name)
        beams = images[0].beams
        if any(im.beams != beams or im.shape != images[0].shape for im in images):
            raise error.DataError('range images in {} do not share one sensor layout'.format(name))
        return np.stack([to_model_space(im) for im in images]), beams
    if name.endswith('.csv'):
        return read_states_csv(name), None
    raise error.DataError('{!r} is neither a registered dataset nor a states file or directory'.format(name))


def build_model(params, data_shape, beams):
    kind = params['model_kind']
    if kind == 'auto':
        kind = 'hourglass' if len(data_shape) == 3 else 'mlp'
    try:
        widths = tuple(int(w) for w in params['model_widths'].split(',') if w.strip())
    except ValueError:
        raise click.BadParameter('expected comma-separated integers, got {!r}'.format(params['model_widths']),
                                 param_hint='--model-widths')
    spec = {'data_shape': data_shape, 'time_dim': params['model_time_dim'], 'seed': params['seed']}
    if widths:
        spec['widths'] = widths
    if kind == 'mlp':
        spec['activation'] = params['model_activation']
    else:
        spec.update(depth=params['model_depth'], ape=params['model_ape'],
                    elevations=beams.elevations.tolist() if beams is not None else None)
    return nets.make(kind, **spec)


def trainer_kwargs(params):
    return {'steps': params['optimizer_steps'], 'batch_size': params['optimizer_batch_size'],
            'lr': params['optimizer_lr'], 'seed': params['seed'], 'progress': params['progress']}


def model_beams(model, metadata):
    if len(model.data_shape) != 3:
        return None
    if getattr(model, 'beams', None) is not None:
        return model.beams
    if 'elevations' in metadata:
        return BeamTable(metadata['elevations'])
    return BeamTable.uniform(model.data_shape[1])


def save_stage(params, model, stage, trainer, digest, metadata):
    """Writes the checkpoint and loss curve of a trained stage."""
    name = stage_file(stage)
    path = os.path.join(params['out'], 'model-{}.ckpt'.format(name))
    extra = {'config_digest': digest, 'optimizer': trainer.metadata()}
    extra.update(metadata)
    ckpt = save_model(path, model, stage, extra)
    loss_path = trainer.write_loss_csv(os.path.join(params['out'], 'loss-{}.csv'.format(name)), digest)
    write_manifest(params['out'], [(os.path.basename(path), stage.label, digest),
                                   (os.path.basename(loss_path), 'loss', digest)])
    click.echo('{} {}'.format(path, ckpt))
    return path


def load_parent(path):
    model, stage, digest, metadata = load_model(path)
    logger.info('loaded %s parent %s (%s)', stage.label, path, digest[:12])
    return model, stage, digest, metadata


def obtain_pairs(params, model, stage, parent_digest, solver, digest):
    """Loads the pair file in the output directory when it was generated
    the same way; generates and saves it otherwise.
    """
    path = os.path.join(params['out'], 'pairs-{}.pairs'.format(stage_file(stage)))
    fields = solver.replace(record=False).to_dict()
    fields['batch_size'] = PAIR_BATCH
    expected = generator_digest(parent_digest, params['flow_pairs'], fields, params['seed'], model.data_shape)
    if os.path.exists(path):
        pairs = PairDataset.load(path)
        if pairs.generator_digest == expected:
            logger.info('reusing %d pairs from %s', len(pairs), path)
            return pairs
        logger.info('pairs in %s come from another generator; regenerating', path)
    pairs = generate_reflow_pairs(model, params['flow_pairs'], solver, params['seed'], stage, parent_digest,
                                  batch_size=PAIR_BATCH, progress=params['progress'], config_digest=digest)
    pairs.save(path)
    write_manifest(params['out'], [(os.path.basename(path), 'pairs', digest)])
    return pairs


def read_model_states(path, model, x_max, counter=None):
    """Reads states for ``model`` from a states .csv, a .rimg or .bin file,
    or a directory of .rimg files.
    """
    if path.endswith('.csv'):
        states = read_states_csv(path)
        if states.shape[1] != model.data_size:
            raise error.ShapeError('{} holds {}-dimensional states, the model expects {}'.format(
                path, states.shape[1], model.data_shape))
        return states.reshape((len(states),) + model.data_shape)
    if len(model.data_shape) != 3:
        raise error.DataError('{} model reads states from .csv files, got {}'.format(model.kind, path))
    if os.path.isdir(path):
        images = read_range_image_dir(path)
    elif path.endswith('.rimg'):
        images = [read_range_image(path)[0]]
    elif path.endswith('.bin'):
        beams = model_beams(model, {})
        images = [project(read_point_cloud(path), beams, model.data_shape[2], x_max, counter)]
    else:
        raise error.DataError('cannot read states from {}'.format(path))
    states = np.stack([to_model_space(im) for im in images])
    if states.shape[1:] != model.data_shape:
        raise error.ShapeError('{} holds images of shape {}, the model expects {}'.format(
            path, states.shape[1:], model.data_shape))
    return states


def write_samples(out, prefix, states, nfe, beams, x_max, digest):
    """Writes generated states: one .rimg and one .bin per range image, or a
    single states .csv for vector data. Returns the written file names.
    """
    if beams is None:
        path = write_states_csv(os.path.join(out, '{}.csv'.format(prefix)), states, nfe, digest)
        return [os.path.basename(path)]
    counter = ClampCounter()
    names = []
    for i, values in enumerate(states):
        image = from_model_space(values, beams, x_max, counter)
        stem = os.path.join(out, '{}-{:04d}'.format(prefix, i))
        write_range_image(stem + '.rimg', image, digest)
        write_point_cloud(stem + '.bin', unproject(image, counter))
        names.extend([os.path.basename(stem) + '.rimg', os.path.basename(stem) + '.bin'])
    counter.report()
    return names


def write_nfe(out, nfe, digest, name='nfe.csv'):
    rows = [('sample', 'nfe', 'config_digest')] + [(i, int(n), digest) for i, n in enumerate(nfe)]
    with open(os.path.join(out, name), 'w') as f:
        f.write(''.join('{},{},{}\n'.format(*row) for row in rows))
    return name


def load_sample_set(path, extent, bins):
    """Reads an evaluation set.

    Returns:
        ('points', (n, d) array) for a states .csv, or ('histograms', list of
        BevHistogram) for a point-cloud file or a directory of .bin/.rimg
    """
    if path.endswith('.csv'):
        return 'points', read_states_csv(path)
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.endswith('.bin'))
        if names:
            clouds = [read_point_cloud(os.path.join(path, n)) for n in names]
        else:
            clouds = [unproject(im) for im in read_range_image_dir(path)]
    elif path.endswith('.bin'):
        clouds = [read_point_cloud(path)]
    elif path.endswith('.rimg'):
        clouds = [unproject(read_range_image(path)[0])]
    elif os.path.exists(path):
        raise error.DataError('cannot evaluate {}; expected .csv, .bin, .rimg or a directory'.format(path))
    else:
        raise error.DataError('evaluation set {} does not exist'.format(path))
    return 'histograms', [bev_histogram(c, (-extent, extent), bins) for c in clouds]


# Commands
# ----------------------------

@click.group(cls=FlowGroup)
def main():
    """Rectified-flow training, sampling and evaluation for toy vectors and
    LiDAR range images."""


@main.command()
@run_options
@model_options
@data_options
@optimizer_options
@click.option('--flow-stage', type=click.Choice(['1-RF']), default='1-RF',
              help='Stage to train from data; 2-RF and k-TD use reflow and distill')
@click.pass_context
def train(ctx, **params):
    """Trains a 1-RF model on data."""
    digest = setup_run(ctx, params)
    states, beams = load_dataset(params)
    model = build_model(params, states.shape[1:], beams)
    model, stage, trainer = train_1rf(model, states, config_digest=digest, **trainer_kwargs(params))
    metadata = {'data': params['data_name'], 'x_max': params['data_x_max']}
    if beams is not None:
        metadata['elevations'] = beams.elevations.tolist()
    save_stage(params, model, stage, trainer, digest, metadata)


@main.command()
@run_options
@optimizer_options
@solver_options('dopri5')
@click.option('--parent', required=True, type=click.Path(dir_okay=False), help='1-RF checkpoint')
@click.option('--flow-pairs', type=click.IntRange(min=1), default=10000, help='Noise-data pairs to generate')
@click.option('--flow-time-dist', type=click.Choice(['u-shaped', 'uniform']), default='u-shaped')
@click.option('--flow-a', type=float, default=4.0, help='Concentration of the U-shaped time density')
@click.pass_context
def reflow(ctx, **params):
    """Trains a 2-RF model on pairs generated by a 1-RF parent."""
    digest = setup_run(ctx, params)
    model, parent_stage, parent_digest, metadata = load_parent(params['parent'])
    if parent_stage.tag != '1-RF':
        raise error.StageError('reflow needs a 1-RF parent; {} is {}'.format(params['parent'], parent_stage.label))
    pairs = obtain_pairs(params, model, parent_stage, parent_digest, build_solver(params), digest)
    time_dist = TimeDist(params['flow_time_dist'], params['flow_a'])
    model, stage, trainer = train_reflow(model, pairs, parent_stage, parent_digest, config_digest=digest,
                                         time_dist=time_dist, **trainer_kwargs(params))
    inherited = {k: metadata[k] for k in ('data', 'x_max', 'elevations') if k in metadata}
    save_stage(params, model, stage, trainer, digest, inherited)


@main.command()
@run_options
@optimizer_options
@solver_options('dopri5')
@click.option('--parent', required=True, type=click.Path(dir_okay=False), help='1-RF or 2-RF checkpoint')
@click.option('--flow-k', type=click.IntRange(min=1), required=True, help='Sampling steps of the student')
@click.option('--flow-pairs', type=click.IntRange(min=1), default=10000, help='Noise-data pairs to generate')
@click.pass_context
def distill(ctx, **params):
    """Distills a flow into a k-step model."""
    digest = setup_run(ctx, params)
    model, parent_stage, parent_digest, metadata = load_parent(params['parent'])
    if parent_stage.distilled:
        raise error.StageError('cannot distill the distilled {} model {}'.format(parent_stage.label, params['parent']))
    solver = build_solver(params)
    pairs = obtain_pairs(params, model, parent_stage, parent_digest, solver, digest)
    model, stage, trainer = distill_model(model, params['flow_k'], pairs, parent_stage, parent_digest,
                                          solver=solver, config_digest=digest, **trainer_kwargs(params))
    inherited = {k: metadata[k] for k in ('data', 'x_max', 'elevations') if k in metadata}
    save_stage(params, model, stage, trainer, digest, inherited)


@main.command()
@run_options
@solver_options('euler', 256)
@click.option('--checkpoint', required=True, type=click.Path(dir_okay=False))
@click.option('--n', 'count', type=click.IntRange(min=0), default=16, help='Number of samples')
@click.option('--latents', default=None, type=click.Path(dir_okay=False),
              help='States .csv of latents to integrate instead of fresh draws')
@click.option('--batch-size', type=click.IntRange(min=1), default=1024)
@click.pass_context
def sample(ctx, **params):
    """Generates samples from a checkpoint."""
    digest = setup_run(ctx, params)
    model, stage, ckpt, metadata = load_model(params['checkpoint'])
    solver = distilled_solver(ctx, params, stage)
    started = time.perf_counter()
    if params['latents']:
        latents = read_model_states(params['latents'], model, metadata.get('x_max', DEFAULT_X_MAX))
        states, nfe = generate(model, latents, solver, stage, params['batch_size'])
    else:
        states, nfe, _ = sample_states(model, params['count'], solver, params['seed'], stage, params['batch_size'])
    elapsed = time.perf_counter() - started
    logger.info('%d samples with %s in %.3f s (%.4f s per sample)', len(states), solver.describe(), elapsed,
                elapsed / max(len(states), 1))
    names = write_samples(params['out'], 'sample', states, nfe, model_beams(model, metadata),
                          metadata.get('x_max', DEFAULT_X_MAX), digest)
    names.append(write_nfe(params['out'], nfe, digest))
    write_manifest(params['out'], [(n, 'sample', digest) for n in names])


@main.command()
@run_options
@solver_options('dopri5')
@click.option('--checkpoint', required=True, type=click.Path(dir_okay=False))
@click.option('--input', 'input_path', required=True, type=click.Path(),
              help='States .csv, .rimg or .bin file, or a directory of .rimg files')
@click.option('--batch-size', type=click.IntRange(min=1), default=1024)
@click.pass_context
def invert(ctx, **params):
    """Maps data to latents by integrating backward in time."""
    digest = setup_run(ctx, params)
    model, stage, ckpt, metadata = load_model(params['checkpoint'])
    solver = build_solver(params, direction='reverse')
    counter = ClampCounter()
    states = read_model_states(params['input_path'], model, metadata.get('x_max', DEFAULT_X_MAX), counter)
    counter.report()
    latents, nfe = invert_states(model, states, solver, stage, params['batch_size'])
    logger.info('inverted %d states with %s', len(states), solver.describe())
    path = write_states_csv(os.path.join(params['out'], 'latents.csv'), latents, nfe, digest)
    write_manifest(params['out'], [(os.path.basename(path), 'latents', digest)])


@main.command()
@run_options
@solver_options('euler', 256)
@click.option('--checkpoint', required=True, type=click.Path(dir_okay=False), help='Model generating the chain')
@click.option('--invert-checkpoint', default=None, type=click.Path(dir_okay=False),
              help='Model used for inversion; defaults to --checkpoint')
@click.option('--invert-tol', type=float, default=1e-5, help='Tolerance of the adaptive inversion')
@click.option('--input', 'input_path', required=True, type=click.Path(),
              help='Two endpoint states (.csv rows or .rimg files)')
@click.option('--points', type=click.IntRange(min=0), default=4, help='Interior points of the chain')
@click.pass_context
def interp(ctx, **params):
    """Interpolates two data states along a spherical path in latent space."""
    digest = setup_run(ctx, params)
    model, stage, _, metadata = load_model(params['checkpoint'])
    if params['invert_checkpoint']:
        inverter, invert_stage, _, _ = load_model(params['invert_checkpoint'])
    else:
        inverter, invert_stage = model, stage
    if inverter.data_shape != model.data_shape:
        raise error.ShapeError('inversion model states {} differ from the generator states {}'.format(
            inverter.data_shape, model.data_shape))
    x_max = metadata.get('x_max', DEFAULT_X_MAX)
    states = read_model_states(params['input_path'], model, x_max)
    if len(states) < 2:
        raise error.DataError('interpolation needs two endpoint states, {} holds {}'.format(
            params['input_path'], len(states)))
    inverse = SolverSpec('dopri5', atol=params['invert_tol'], rtol=params['invert_tol'], direction='reverse')
    ends, _ = invert_states(inverter, states[:2], inverse, invert_stage)
    chain = slerp(ends[0], ends[1], np.linspace(0.0, 1.0, params['points'] + 2))
    samples, nfe = generate(model, chain, distilled_solver(ctx, params, stage), stage)
    names = write_samples(params['out'], 'interp', samples, nfe, model_beams(model, metadata), x_max, digest)
    names.append(os.path.basename(write_states_csv(os.path.join(params['out'], 'interp-latents.csv'), chain,
                                                   digest=digest)))
    write_manifest(params['out'], [(n, 'interp', digest) for n in names])


@main.command('project')
@run_options
@click.option('--input', 'input_path', required=True, type=click.Path(),
              help='.bin point cloud, .rimg range image, or a directory of either')
@click.option('--beams', 'beam_file', default=None, type=click.Path(dir_okay=False),
              help='Elevation table, one angle in degrees per line, top row first')
@click.option('--height', type=click.IntRange(min=1), default=64, help='Rows of a uniform beam table')
@click.option('--width', type=click.IntRange(min=1), default=1024, help='Azimuth columns')
@click.option('--data-x-max', type=float, default=DEFAULT_X_MAX, help='Maximum range in meters')
@click.pass_context
def project_cmd(ctx, **params):
    """Converts point clouds to range images and back."""
    digest = setup_run(ctx, params)
    path = params['input_path']
    if os.path.isdir(path):
        inputs = [os.path.join(path, n) for n in sorted(os.listdir(path)) if n.endswith(('.bin', '.rimg'))]
    else:
        inputs = [path]
    if not inputs:
        raise error.DataError('no .bin or .rimg files in {}'.format(path))
    beams = BeamTable.from_file(params['beam_file']) if params['beam_file'] else BeamTable.uniform(params['height'])
    counter = ClampCounter()
    rows = []
    for name in inputs:
        stem = os.path.join(params['out'], os.path.splitext(os.path.basename(name))[0])
        if name.endswith('.bin'):
            image = project(read_point_cloud(name), beams, params['width'], params['data_x_max'], counter)
            write_range_image(stem + '.rimg', image, digest)
            rows.append((os.path.basename(stem) + '.rimg', 'range-image', digest))
        elif name.endswith('.rimg'):
            write_point_cloud(stem + '.bin', unproject(read_range_image(name)[0], counter))
            rows.append((os.path.basename(stem) + '.bin', 'point-cloud', digest))
        else:
            raise error.DataError('cannot project {}; expected .bin or .rimg'.format(name))
    counter.report()
    logger.info('converted %d files', len(rows))
    write_manifest(params['out'], rows)


@main.command('eval')
@run_options
@click.option('--reference', required=True, type=click.Path(), help='Reference set')
@click.option('--generated', required=True, type=click.Path(), help='Generated set')
@click.option('--eval-extent', type=float, default=50.0, help='Half-width of the BEV grid in meters')
@click.option('--eval-bins', type=click.IntRange(min=1), default=100, help='BEV cells per axis')
@click.option('--eval-projections', type=click.IntRange(min=1), default=64, help='Sliced W2 directions')
@click.option('--eval-bandwidth', type=float, default=None, help='MMD kernel bandwidth (median heuristic if unset)')
@click.option('--checkpoint', default=None, type=click.Path(dir_okay=False),
              help='Also sweep sliced W2 over step counts of this model')
@click.option('--eval-sweep', default='1,2,4,8,16,32,64,128,256', help='Comma-separated Euler step counts')
@click.option('--eval-samples', type=click.IntRange(min=1), default=2000, help='Samples per sweep point')
@click.pass_context
def evaluate(ctx, **params):
    """Compares a generated set against a reference set."""
    digest = setup_run(ctx, params)
    extent, bins = params['eval_extent'], params['eval_bins']
    ref_kind, reference = load_sample_set(params['reference'], extent, bins)
    gen_kind, generated = load_sample_set(params['generated'], extent, bins)
    if ref_kind != gen_kind:
        raise error.DataError('cannot compare {} with {}'.format(ref_kind, gen_kind))
    metrics = []
    if ref_kind == 'histograms':
        metrics.append(('jsd', jsd(mean_histogram(reference), mean_histogram(generated))))
        reference = [h for h in reference if h.normalized]
        generated = [h for h in generated if h.normalized]
    else:
        metrics.append(('sliced_w2', sliced_w2(reference, generated, params['eval_projections'], params['seed'])))
    if len(reference) >= 2 and len(generated) >= 2:
        metrics.append(('mmd', mmd(reference, generated, params['eval_bandwidth'])))
    else:
        logger.warning('skipping MMD: sets of %d and %d members', len(reference), len(generated))
    if params['checkpoint']:
        if ref_kind != 'points':
            raise error.DataError('step sweeps compare against a states .csv reference')
        model, stage, _, _ = load_model(params['checkpoint'])
        try:
            steps = [int(s) for s in params['eval_sweep'].split(',') if s.strip()]
        except ValueError:
            raise click.BadParameter('expected comma-separated integers', param_hint='--eval-sweep')
        for nfe, value in nfe_sweep(model, reference, steps, params['eval_samples'], params['seed'], stage,
                                    projections=params['eval_projections']):
            metrics.append(('sliced_w2@nfe={}'.format(nfe), value))
    path = write_metric_report(os.path.join(params['out'], 'metrics.csv'), metrics, digest)
    write_manifest(params['out'], [(os.path.basename(path), 'metrics', digest)])


@main.command()
@run_options
@solver_options('euler', 64)
@click.option('--checkpoint', required=True, type=click.Path(dir_okay=False))
@click.option('--n', 'count', type=click.IntRange(min=1), default=2000, help='Trajectories to measure')
@click.option('--eval-per-element', is_flag=True, help='Per-element rather than whole-state curvature')
@click.option('--eval-top-k', type=click.IntRange(min=1), default=200, help='Most curved trajectories to keep')
@click.option('--batch-size', type=click.IntRange(min=1), default=1024)
@click.pass_context
def curvature(ctx, **params):
    """Measures trajectory straightness along a fixed time grid."""
    digest = setup_run(ctx, params)
    model, stage, _, _ = load_model(params['checkpoint'])
    solver = distilled_solver(ctx, params, stage)
    x0 = draw_latents(model.data_shape, params['count'], params['seed'])
    profile = curvature_profile(model, x0, solver, per_element=params['eval_per_element'],
                                batch_size=params['batch_size'])
    out = params['out']
    profile.write_csv(os.path.join(out, 'curvature.csv'), digest)
    profile.write_top_k_csv(os.path.join(out, 'curvature-top-k.csv'), params['eval_top_k'], digest)
    write_metric_report(os.path.join(out, 'metrics.csv'),
                        [('curvature_integral', profile.mean_integral), ('curvature_excluded', profile.excluded)],
                        digest)
    write_manifest(out, [(n, 'curvature', digest) for n in ('curvature.csv', 'curvature-top-k.csv', 'metrics.csv')])


if __name__ == '__main__':
    main()
