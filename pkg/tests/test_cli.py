import json

import numpy as np
import pandas as pd
import pytest

from app import main
from nplcm.services.presets import preset_model
from nplcm.simulate.scenarios import get_scenario
from nplcm.utils.file_utils import write_json


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def simulated(workdir):
    out = workdir / 'sim'
    assert main(['simulate', '--scenario', 'sim2', '--grid', '1', '--seed', '4', '--out', str(out)]) == 0
    spec, _ = preset_model(get_scenario('sim2', 1))
    write_json(workdir / 'model.json', spec.model_dump(mode='json'))
    return out


@pytest.fixture
def fitted(simulated, workdir):
    run = workdir / 'fit'
    code = main(['fit', '--data', str(simulated / 'data.csv'), '--model', str(workdir / 'model.json'),
                 '--chains', '2', '--burnin', '10', '--keep', '100', '--seed', '1',
                 '--checkpoint-every', '50', '--out', str(run)])
    assert code == 0
    return run


def test_simulate_writes_dataset_and_truth(simulated):
    data = pd.read_csv(simulated / 'data.csv')
    assert list(data.columns[:2]) == ['y', 'brs_A']
    assert len(data) == 500
    truth = pd.read_csv(simulated / 'truth.csv')
    assert set(truth.loc[truth['y'] == 1, 'I']) <= {1, 2, 3}
    manifest = json.loads((simulated / 'manifest.json').read_text())
    assert manifest['seeds'] == {'data': 4}
    assert 'data.csv' in manifest['outputs']


def test_fit_diagnose_summarize(fitted, capsys):
    assert (fitted / 'draws' / 'chain_1.csv').exists()
    assert (fitted / 'checkpoints' / 'chain_0.ckpt').exists()
    assert json.loads((fitted / 'manifest.json').read_text())['command'] == 'fit'

    capsys.readouterr()
    assert main(['diagnose', '--draws', str(fitted), '--filter', 'theta*', '--json']) == 0
    report = json.loads(capsys.readouterr().out)
    assert report['n_chains'] == 2
    assert report['n_draws'] == 100
    assert all(row['param'].startswith('theta[') for row in report['data'])
    assert (fitted / 'diagnostics.json').exists()

    assert main(['summarize', '--draws', str(fitted), '--what', 'overall']) == 0
    table = pd.read_csv(fitted / 'summary_overall.csv')
    assert list(table['cause']) == ['A', 'B', 'C']
    assert table['mean'].sum() == pytest.approx(1.0)


def test_summarize_pef_on_grid(fitted, workdir):
    pd.DataFrame({'x_s2': [0.0, 1.0]}).to_csv(workdir / 'grid.csv', index=False)
    out = workdir / 'pef.csv'
    assert main(['summarize', '--draws', str(fitted), '--what', 'pef',
                 '--grid', str(workdir / 'grid.csv'), '--out', str(out)]) == 0
    curve = pd.read_csv(out)
    assert len(curve) == 6
    np.testing.assert_allclose(curve.groupby('grid_point')['mean'].sum(), 1.0)


def test_summarize_contrast_against_reference(fitted, workdir):
    pd.DataFrame({'x_s2': [1.0, 0.0]}).to_csv(workdir / 'profiles.csv', index=False)
    out = workdir / 'contrast.csv'
    args = ['summarize', '--draws', str(fitted), '--what', 'contrast',
            '--grid', str(workdir / 'profiles.csv'), '--cause', 'A', '--out', str(out)]
    assert main(args + ['--reference', 'C']) == 0
    row = pd.read_csv(out).iloc[0]
    assert (row['cause'], row['reference']) == ('A', 'C')
    assert row['lo'] <= row['mean'] <= row['hi']
    assert main(args + ['--reference', 'A']) == 2


def test_summary_needing_grid_fails_with_config_code(fitted):
    assert main(['summarize', '--draws', str(fitted), '--what', 'pef']) == 2


def test_missing_draws_is_artifact_error(workdir, capsys):
    assert main(['diagnose', '--draws', str(workdir / 'nowhere')]) == 6
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith('{')]
    assert json.loads(lines[-1])['type'] == 'ArtifactError'


def test_invalid_chain_settings(simulated, workdir):
    code = main(['fit', '--data', str(simulated / 'data.csv'), '--model', str(workdir / 'model.json'),
                 '--keep', '2', '--thin', '5', '--out', str(workdir / 'bad')])
    assert code == 2


def test_unknown_scenario_is_usage_error(workdir):
    with pytest.raises(SystemExit) as info:
        main(['simulate', '--scenario', 'sim3', '--out', str(workdir / 'x')])
    assert info.value.code == 2


def test_commands_only_write_under_out(workdir):
    assert main(['simulate', '--scenario', 'sim1', '--seed', '2', '--out', str(workdir / 'sim')]) == 0
    assert sorted(p.name for p in workdir.iterdir()) == ['sim']
