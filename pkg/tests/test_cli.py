import csv
import logging
import os

import click
import numpy as np
import pytest
from click.testing import CliRunner

from rangeflow import error, nets
from rangeflow.eval import read_metric_report
from rangeflow.flow import FlowStage, save_model
from rangeflow.lidar import BeamTable, PointCloud, pixel_directions, read_point_cloud, write_point_cloud
from rangeflow.run_flow import FlowGroup, main
from rangeflow.utils import read_states_csv, write_states_csv

TINY = ['--seed', '0', '--no-progress', '--optimizer-steps', '5', '--optimizer-batch-size', '16']


def _invoke(args):
    return CliRunner().invoke(main, args)


def _rows(path):
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


@pytest.fixture
def trained(tmp_path):
    """Output directory holding a tiny 1-RF checkpoint."""
    out = str(tmp_path / 'run')
    result = _invoke(['train', '--out', out, '--data-count', '64', '--model-widths', '16',
                      '--model-time-dim', '8'] + TINY)
    assert result.exit_code == 0, result.output
    return out


def _reflow_args(out, parent):
    return ['reflow', '--out', out, '--parent', parent, '--flow-pairs', '32', '--solver-method', 'euler',
            '--solver-steps', '4'] + TINY


class TestTrain:

    def test_outputs(self, trained):
        assert {'model-1rf.ckpt', 'loss-1rf.csv', 'manifest.csv'} <= set(os.listdir(trained))
        assert len(_rows(os.path.join(trained, 'loss-1rf.csv'))) == 5
        kinds = [row['kind'] for row in _rows(os.path.join(trained, 'manifest.csv'))]
        assert kinds == ['1-RF', 'loss']

    def test_rerun_is_reproducible(self, tmp_path):
        digests = []
        for name in ('a', 'b'):
            result = _invoke(['train', '--out', str(tmp_path / name), '--data-count', '64',
                              '--model-widths', '16'] + TINY)
            assert result.exit_code == 0, result.output
            line = [l for l in result.output.splitlines() if 'model-1rf.ckpt ' in l][0]
            digests.append(line.split()[-1])
        assert digests[0] == digests[1]

    def test_unknown_stage(self, tmp_path):
        out = tmp_path / 'run'
        result = _invoke(['train', '--out', str(out), '--flow-stage', '2-RF'] + TINY)
        assert result.exit_code == 1
        assert not out.exists()

    def test_missing_seed(self, tmp_path):
        result = _invoke(['train', '--out', str(tmp_path / 'run'), '--optimizer-steps', '1'])
        assert result.exit_code == 1

    def test_missing_data(self, tmp_path):
        result = _invoke(['train', '--out', str(tmp_path / 'run'), '--data-name',
                          str(tmp_path / 'absent.csv')] + TINY)
        assert result.exit_code == 2

    def test_states_file(self, tmp_path):
        path = str(tmp_path / 'data.csv')
        write_states_csv(path, np.random.default_rng(0).normal(size=(40, 3)))
        out = str(tmp_path / 'run')
        result = _invoke(['train', '--out', out, '--data-name', path, '--model-widths', '8'] + TINY)
        assert result.exit_code == 0, result.output
        assert os.path.exists(os.path.join(out, 'model-1rf.ckpt'))

    def test_config_file(self, tmp_path):
        config = tmp_path / 'run.ini'
        config.write_text('[run]\nseed = 4\nprogress = false\n[optimizer]\nsteps = 3\nbatch-size = 8\n'
                          '[data]\ncount = 32\n[model]\nwidths = 8\n[eval]\nbins = 10\n')
        out = str(tmp_path / 'run')
        result = _invoke(['train', '--config', str(config), '--out', out])
        assert result.exit_code == 0, result.output
        assert len(_rows(os.path.join(out, 'loss-1rf.csv'))) == 3

    def test_unknown_config_block(self, tmp_path):
        config = tmp_path / 'run.ini'
        config.write_text('[training]\nsteps = 3\n')
        result = _invoke(['train', '--config', str(config), '--out', str(tmp_path / 'run')])
        assert result.exit_code == 1


class TestReflowAndDistill:

    def test_reflow_reuses_pairs(self, trained, caplog):
        parent = os.path.join(trained, 'model-1rf.ckpt')
        assert _invoke(_reflow_args(trained, parent)).exit_code == 0
        assert os.path.exists(os.path.join(trained, 'pairs-1rf.pairs'))
        assert os.path.exists(os.path.join(trained, 'model-2rf.ckpt'))
        with caplog.at_level(logging.INFO, logger='rangeflow'):
            result = _invoke(_reflow_args(trained, parent))
        assert result.exit_code == 0, result.output
        assert any('reusing 32 pairs' in r.getMessage() for r in caplog.records)

    def test_corrupted_pairs(self, trained):
        parent = os.path.join(trained, 'model-1rf.ckpt')
        assert _invoke(_reflow_args(trained, parent)).exit_code == 0
        path = os.path.join(trained, 'pairs-1rf.pairs')
        with open(path, 'rb') as f:
            payload = bytearray(f.read())
        payload[-1] ^= 0xFF
        with open(path, 'wb') as f:
            f.write(bytes(payload))
        assert _invoke(_reflow_args(trained, parent)).exit_code == 2

    def test_reflow_needs_one_rf_parent(self, trained):
        parent = os.path.join(trained, 'model-1rf.ckpt')
        assert _invoke(_reflow_args(trained, parent)).exit_code == 0
        second = os.path.join(trained, 'model-2rf.ckpt')
        assert _invoke(_reflow_args(trained, second)).exit_code == 1

    def test_missing_parent(self, tmp_path):
        result = _invoke(_reflow_args(str(tmp_path / 'run'), str(tmp_path / 'absent.ckpt')))
        assert result.exit_code == 2

    def test_distill_k_must_be_positive(self, trained):
        result = _invoke(['distill', '--out', trained, '--parent', os.path.join(trained, 'model-1rf.ckpt'),
                          '--flow-k', '0'] + TINY)
        assert result.exit_code == 1

    def test_distilled_schedule(self, trained):
        args = ['distill', '--out', trained, '--parent', os.path.join(trained, 'model-1rf.ckpt'), '--flow-k', '2',
                '--flow-pairs', '32', '--solver-method', 'euler', '--solver-steps', '4'] + TINY
        result = _invoke(args)
        assert result.exit_code == 0, result.output
        student = os.path.join(trained, 'model-2td.ckpt')

        out = os.path.join(trained, 'samples')
        result = _invoke(['sample', '--out', out, '--checkpoint', student, '--n', '4', '--seed', '1'])
        assert result.exit_code == 0, result.output
        assert {row['nfe'] for row in _rows(os.path.join(out, 'nfe.csv'))} == {'2'}

        result = _invoke(['sample', '--out', out, '--checkpoint', student, '--n', '4', '--seed', '1',
                          '--solver-steps', '4'])
        assert result.exit_code == 1

        result = _invoke(['distill', '--out', trained, '--parent', student, '--flow-k', '1'] + TINY)
        assert result.exit_code == 1


class TestSampling:

    def test_sample_counts(self, trained):
        out = os.path.join(trained, 'samples')
        result = _invoke(['sample', '--out', out, '--checkpoint', os.path.join(trained, 'model-1rf.ckpt'),
                          '--n', '16', '--seed', '2'])
        assert result.exit_code == 0, result.output
        assert read_states_csv(os.path.join(out, 'sample.csv')).shape == (16, 2)
        assert [row['nfe'] for row in _rows(os.path.join(out, 'nfe.csv'))] == ['256'] * 16

    def test_solver_from_config(self, trained, tmp_path):
        config = tmp_path / 'run.ini'
        config.write_text('[solver]\nmethod = midpoint\n')
        result = _invoke(['sample', '--config', str(config), '--out', str(tmp_path / 's'), '--checkpoint',
                          os.path.join(trained, 'model-1rf.ckpt'), '--seed', '0', '--solver-steps', '3'])
        assert result.exit_code == 0, result.output
        assert {row['nfe'] for row in _rows(str(tmp_path / 's' / 'nfe.csv'))} == {'6'}

    def test_invert_then_sample(self, trained, tmp_path):
        checkpoint = os.path.join(trained, 'model-1rf.ckpt')
        data = np.random.default_rng(5).normal(size=(8, 2)) * 3.0
        path = write_states_csv(str(tmp_path / 'data.csv'), data)
        solver = ['--solver-method', 'dopri5', '--solver-atol', '1e-6', '--solver-rtol', '1e-6']

        result = _invoke(['invert', '--out', str(tmp_path / 'inv'), '--checkpoint', checkpoint, '--input', path,
                          '--seed', '0'] + solver)
        assert result.exit_code == 0, result.output
        latents = str(tmp_path / 'inv' / 'latents.csv')

        result = _invoke(['sample', '--out', str(tmp_path / 'gen'), '--checkpoint', checkpoint, '--latents',
                          latents, '--seed', '0'] + solver)
        assert result.exit_code == 0, result.output
        recovered = read_states_csv(str(tmp_path / 'gen' / 'sample.csv'))
        assert np.sqrt(np.mean((recovered - data) ** 2)) <= 1e-3

    def test_invert_wrong_width(self, trained, tmp_path):
        path = write_states_csv(str(tmp_path / 'data.csv'), np.zeros((2, 3)))
        result = _invoke(['invert', '--out', str(tmp_path / 'inv'), '--checkpoint',
                          os.path.join(trained, 'model-1rf.ckpt'), '--input', path, '--seed', '0'])
        assert result.exit_code == 2

    def test_interp_endpoints(self, trained, tmp_path):
        checkpoint = os.path.join(trained, 'model-1rf.ckpt')
        path = write_states_csv(str(tmp_path / 'ends.csv'), np.array([[2.0, 1.0], [-1.5, 2.5]]))
        result = _invoke(['invert', '--out', str(tmp_path / 'inv'), '--checkpoint', checkpoint, '--input', path,
                          '--seed', '0'])
        assert result.exit_code == 0, result.output
        result = _invoke(['interp', '--out', str(tmp_path / 'interp'), '--checkpoint', checkpoint, '--input', path,
                          '--points', '3', '--seed', '0'])
        assert result.exit_code == 0, result.output
        ends = read_states_csv(str(tmp_path / 'inv' / 'latents.csv'))
        chain = read_states_csv(str(tmp_path / 'interp' / 'interp-latents.csv'))
        assert chain.shape == (5, 2)
        np.testing.assert_allclose(chain[[0, -1]], ends, atol=1e-12)
        assert read_states_csv(str(tmp_path / 'interp' / 'interp.csv')).shape == (5, 2)

    def test_interp_needs_two_states(self, trained, tmp_path):
        path = write_states_csv(str(tmp_path / 'one.csv'), np.ones((1, 2)))
        result = _invoke(['interp', '--out', str(tmp_path / 'interp'), '--checkpoint',
                          os.path.join(trained, 'model-1rf.ckpt'), '--input', path, '--seed', '0'])
        assert result.exit_code == 2


class TestProjectCommand:

    def test_round_trip(self, tmp_path):
        beams = BeamTable.uniform(16)
        rng = np.random.default_rng(0)
        directions = pixel_directions(beams, 128)
        hit = rng.random(directions.shape[:2]) < 0.5
        xyz = directions[hit] * rng.uniform(1.0, 79.0, size=directions.shape[:2])[hit][:, None]
        cloud = PointCloud(np.column_stack([xyz, rng.uniform(0, 1, size=len(xyz))]))
        write_point_cloud(str(tmp_path / 'scan.bin'), cloud)
        original = read_point_cloud(str(tmp_path / 'scan.bin'))

        args = ['--seed', '0', '--height', '16', '--width', '128']
        result = _invoke(['project', '--input', str(tmp_path / 'scan.bin'), '--out', str(tmp_path / 'img')] + args)
        assert result.exit_code == 0, result.output
        result = _invoke(['project', '--input', str(tmp_path / 'img' / 'scan.rimg'), '--out',
                          str(tmp_path / 'back')] + args)
        assert result.exit_code == 0, result.output
        back = read_point_cloud(str(tmp_path / 'back' / 'scan.bin'))
        assert len(back) == len(original)
        assert np.abs(back.xyz - original.xyz).max() <= 1e-4

    def test_corrupt_image(self, tmp_path):
        (tmp_path / 'bad.rimg').write_bytes(b'RFLOWRIM\x01')
        result = _invoke(['project', '--input', str(tmp_path / 'bad.rimg'), '--out', str(tmp_path / 'o'),
                          '--seed', '0'])
        assert result.exit_code == 2


class TestEvalCommands:

    def test_identical_sets(self, tmp_path):
        path = write_states_csv(str(tmp_path / 'set.csv'), np.random.default_rng(0).normal(size=(30, 2)))
        out = str(tmp_path / 'eval')
        result = _invoke(['eval', '--reference', path, '--generated', path, '--out', out, '--seed', '0'])
        assert result.exit_code == 0, result.output
        report = read_metric_report(os.path.join(out, 'metrics.csv'))
        assert report['sliced_w2'][0] == 0.0
        assert abs(report['mmd'][0]) <= 1e-12

    def test_point_cloud_sets(self, tmp_path):
        rng = np.random.default_rng(1)
        for name in ('ref', 'gen'):
            (tmp_path / name).mkdir()
            for i in range(3):
                points = np.column_stack([rng.uniform(-40, 40, size=(200, 3)), rng.uniform(0, 1, size=200)])
                write_point_cloud(str(tmp_path / name / '{}.bin'.format(i)), PointCloud(points))
        out = str(tmp_path / 'eval')
        result = _invoke(['eval', '--reference', str(tmp_path / 'ref'), '--generated', str(tmp_path / 'gen'),
                          '--out', out, '--seed', '0', '--eval-bins', '10'])
        assert result.exit_code == 0, result.output
        report = read_metric_report(os.path.join(out, 'metrics.csv'))
        assert 0.0 < report['jsd'][0] < np.log(2.0)
        assert report['jsd'][1] == pytest.approx(100 * report['jsd'][0])

    def test_sweep(self, trained, tmp_path):
        path = write_states_csv(str(tmp_path / 'set.csv'), np.random.default_rng(2).normal(size=(50, 2)))
        out = str(tmp_path / 'eval')
        result = _invoke(['eval', '--reference', path, '--generated', path, '--out', out, '--seed', '0',
                          '--checkpoint', os.path.join(trained, 'model-1rf.ckpt'), '--eval-sweep', '1,4',
                          '--eval-samples', '20'])
        assert result.exit_code == 0, result.output
        report = read_metric_report(os.path.join(out, 'metrics.csv'))
        assert {'sliced_w2@nfe=1', 'sliced_w2@nfe=4'} <= set(report)

    def test_mixed_sets(self, tmp_path):
        path = write_states_csv(str(tmp_path / 'set.csv'), np.zeros((3, 2)))
        write_point_cloud(str(tmp_path / 'scan.bin'), PointCloud(np.ones((2, 4)) * 0.5))
        result = _invoke(['eval', '--reference', path, '--generated', str(tmp_path / 'scan.bin'),
                          '--out', str(tmp_path / 'eval'), '--seed', '0'])
        assert result.exit_code == 2

    def test_zero_field_curvature(self, tmp_path):
        model = nets.make('mlp', data_shape=(2,), widths=(8,), zero_init_last=True, seed=0)
        checkpoint = str(tmp_path / 'zero.ckpt')
        save_model(checkpoint, model, FlowStage.initial())
        out = str(tmp_path / 'curv')
        result = _invoke(['curvature', '--checkpoint', checkpoint, '--out', out, '--seed', '0', '--n', '10',
                          '--solver-steps', '4', '--eval-top-k', '3'])
        assert result.exit_code == 0, result.output
        assert all(float(row['mean_s']) == 0.0 for row in _rows(os.path.join(out, 'curvature.csv')))
        assert len(_rows(os.path.join(out, 'curvature-top-k.csv'))) == 3 * 4
        assert read_metric_report(os.path.join(out, 'metrics.csv'))['curvature_integral'][0] == 0.0


class TestExitCodes:

    def _group(self, exc):
        @click.group(cls=FlowGroup)
        def cli():
            pass

        @cli.command()
        def fail():
            raise exc

        return cli

    @pytest.mark.parametrize('exc, code', [
        (error.NumericalError('diverged'), 3),
        (error.DomainError('log of -1'), 3),
        (error.DataError('missing'), 2),
        (error.ShapeError('(2,) vs (3,)'), 2),
        (error.StageError('wrong parent'), 1),
        (error.Unregistered('unet'), 1),
    ])
    def test_error_mapping(self, exc, code):
        result = CliRunner().invoke(self._group(exc), ['fail'])
        assert result.exit_code == code
        assert str(exc) in result.output

    def test_success(self):
        @click.group(cls=FlowGroup)
        def cli():
            pass

        @cli.command()
        def ok():
            click.echo('done')

        result = CliRunner().invoke(cli, ['ok'])
        assert result.exit_code == 0 and result.output == 'done\n'
