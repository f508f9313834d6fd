import json

import pytest

from nplcm import SCHEMA_VERSION
from nplcm.middleware.error_handler import ArtifactError
from nplcm.models.manifest import ManifestRegistry, RunManifest
from nplcm.utils.file_utils import write_json
from nplcm.utils.response_formatter import error_response, success_response


@pytest.fixture
def run_dir(tmp_path):
    (tmp_path / 'draws').mkdir()
    (tmp_path / 'draws' / 'chain_0.csv').write_text("a\n1\n")
    (tmp_path / 'chain_0.ckpt').write_bytes(b"x")
    (tmp_path / 'data.csv').write_text("y,brs_A\n1,1\n0,0\n")
    return tmp_path


def test_save_lists_outputs(run_dir):
    manifest = RunManifest(command='fit', arguments={'chains': 2}, seeds={'seed': 1})
    manifest.add_input('data', run_dir / 'data.csv')
    registry = ManifestRegistry(run_dir)
    path = registry.save(manifest)

    assert path.name == 'manifest.json'
    assert registry.exists()
    loaded = registry.load()
    assert loaded.outputs == ['data.csv', 'draws/chain_0.csv']
    assert loaded.seeds == {'seed': 1}
    assert len(loaded.input_hashes['data']) == 64


def test_verify_inputs_detects_changes(run_dir):
    manifest = RunManifest(command='fit', arguments={})
    manifest.add_input('data', run_dir / 'data.csv')
    registry = ManifestRegistry(run_dir)
    registry.save(manifest)
    assert registry.verify_inputs({'data': run_dir / 'data.csv'}) == {'data': True}
    (run_dir / 'data.csv').write_text("y,brs_A\n1,0\n0,0\n")
    assert registry.verify_inputs({'data': run_dir / 'data.csv'}) == {'data': False}


def test_incompatible_schema(tmp_path):
    write_json(tmp_path / 'manifest.json', {'command': 'fit', 'arguments': {},
                                            'schema_version': '99.0'})
    with pytest.raises(ArtifactError, match="incompatible"):
        ManifestRegistry(tmp_path).load()


def test_missing_manifest(tmp_path):
    with pytest.raises(ArtifactError, match="Missing artifact"):
        ManifestRegistry(tmp_path).load()


def test_compare_runs(tmp_path):
    left, right = tmp_path / 'a', tmp_path / 'b'
    left.mkdir()
    right.mkdir()
    ManifestRegistry(left).save(RunManifest(command='fit', arguments={'keep': 100}, seeds={'seed': 1}))
    ManifestRegistry(right).save(RunManifest(command='fit', arguments={'keep': 100}, seeds={'seed': 2}))
    diff = ManifestRegistry(left).compare(ManifestRegistry(right))
    assert diff == {'seeds': {'seed': {'left': 1, 'right': 2}}}


def test_follow_up_manifest_name(run_dir):
    registry = ManifestRegistry(run_dir, filename='manifest_diagnose.json')
    registry.save(RunManifest(command='diagnose', arguments={}))
    data = json.loads((run_dir / 'manifest_diagnose.json').read_text())
    assert data['command'] == 'diagnose'
    assert data['schema_version'] == SCHEMA_VERSION


def test_response_envelopes():
    ok = success_response({'n': 1}, message='done', timestamp=False, command='fit')
    assert ok == {'status': 'success', 'schema_version': SCHEMA_VERSION,
                  'version': ok['version'], 'message': 'done', 'data': {'n': 1}, 'command': 'fit'}
    err = error_response('ModelError', message='bad')
    assert err['status'] == 'error'
    assert 'timestamp' in err
