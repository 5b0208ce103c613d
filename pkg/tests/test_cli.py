import json
import sys

import pytest

try:
    from imdyn.cli import EXIT_INPUT_ERROR, EXIT_OK, EXIT_REFUSED, generate_error_response, main, run
    from imdyn.fixtures import tent
    from imdyn.map_model import dump_map

    IMPORTS_SUCCESSFUL = True
except ImportError as e:
    IMPORTS_SUCCESSFUL = False
    IMPORT_ERROR = str(e)


def _error(stderr: str) -> dict:
    return json.loads(stderr.strip().splitlines()[-1])["error"]


class TestImplementation:
    """Test that the command line can be imported."""

    def test_imports(self):
        assert IMPORTS_SUCCESSFUL, f"Failed to import the command line: {IMPORT_ERROR if not IMPORTS_SUCCESSFUL else ''}"
        assert callable(run), "run should be a callable function"
        assert callable(main), "main should be a callable function"


@pytest.mark.skipif(not IMPORTS_SUCCESSFUL, reason="Imports failed")
class TestErrorResponse:
    """Test the JSON error payload."""

    def test_fields(self):
        data = json.loads(generate_error_response("bad map", code=1))
        assert data == {"error": {"code": 1, "message": "bad map", "stacktrace": None}}


@pytest.mark.skipif(not IMPORTS_SUCCESSFUL, reason="Imports failed")
class TestAnalyses:
    """Test each subcommand on the named fixtures."""

    @pytest.mark.asyncio
    async def test_expand(self, capsys):
        assert await run(['expand', 'fixture:tent']) == EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[-1] == 'N=1 min_expansion=2'
        assert 'witness_word=0' in out

    @pytest.mark.asyncio
    async def test_expand_refused(self, capsys):
        assert await run(['expand', 'fixture:attracting_everywhere', '--limit', '3']) == EXIT_REFUSED
        assert capsys.readouterr().out.splitlines()[-1].startswith('refused: no N <= 3')

    @pytest.mark.asyncio
    async def test_kn_from_document(self, tmp_path, capsys):
        document = tmp_path / 'tent.map'
        document.write_text(dump_map(tent()))
        output = tmp_path / 'out' / 'kn.csv'
        assert await run(['kn', str(document), '--nmax', '3', '--output', str(output)]) == EXIT_OK
        assert output.read_text().splitlines() == ['n,K_n,orbit_count,attaining_word', '1,2,2,0', '2,4,1,0-1',
                                                   '3,8,2,0-0-1']
        assert capsys.readouterr().out.strip() == 'K_1=2 K_2=4 K_3=8'

    @pytest.mark.asyncio
    async def test_orbits(self, capsys):
        assert await run(['orbits', 'fixture:tent', '--period', '3']) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[-1] == 'period=3 orbits=2'

    @pytest.mark.asyncio
    async def test_mane(self, capsys):
        assert await run(['mane', 'fixture:tent', '--avoid', '9/20,11/20', '--nmax', '6']) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[-1] == 'certified=yes lambda=2 C=1'

    @pytest.mark.asyncio
    async def test_renorm(self, capsys):
        assert await run(['renorm', 'fixture:tent_13_10', '--qmax', '8']) == EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[-1] == 'c=1/2:depth=1'
        assert 'c=1/2 level=1 J=[10/23,13/23]' in out

    @pytest.mark.asyncio
    async def test_distort_random_maps(self, capsys):
        assert await run(['distort', '--trials', '5', '--seed', '3', '--nmax', '3']) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert out[0] == 'map_id,J_lo,J_hi,n,empirical,S,bound_multiplicity,bound_sum,pass'
        assert out[-1] == 'trials=5 violations=0'

    @pytest.mark.asyncio
    async def test_omega_exact(self, capsys):
        args = ['omega', 'fixture:tent', '--burn', '10', '--steps', '20', '--eps-list', '1/100']
        assert await run(args) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[-1] == 'arithmetic=exact 1/100:1/50'

    @pytest.mark.asyncio
    async def test_omega_float_mode(self, capsys):
        args = ['omega', 'fixture:tent', '--mode', 'float', '--burn', '10', '--steps', '20', '--eps-list', '0.01']
        assert await run(args) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[-1].startswith('arithmetic=float')

    @pytest.mark.asyncio
    async def test_acip(self, capsys):
        assert await run(['acip', 'fixture:tent', '--bins', '16']) == EXIT_OK
        summary = capsys.readouterr().out.splitlines()[-1]
        assert summary.startswith('bins=16 ') and summary.endswith('converged=yes')

    @pytest.mark.asyncio
    async def test_returns(self, capsys):
        assert await run(['returns', 'fixture:tent', '--base', '2/5', '--horizon', '3']) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[-1].startswith('components=14 ')

    @pytest.mark.asyncio
    async def test_classify(self, capsys):
        assert await run(['classify', 'fixture:steep_shallow']) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[-1] == 'E=no D=yes C=yes'

    @pytest.mark.asyncio
    async def test_fixture(self, tmp_path, capsys):
        output = tmp_path / 'tent.map'
        assert await run(['fixture', 'tent', '--output', str(output)]) == EXIT_OK
        assert output.read_text() == dump_map(tent())
        assert capsys.readouterr().out.strip() == 'fixture=tent'


@pytest.mark.skipif(not IMPORTS_SUCCESSFUL, reason="Imports failed")
class TestExitCodes:
    """Test the exit status and the error payloads."""

    @pytest.mark.asyncio
    async def test_acip_without_certificate(self, capsys):
        assert await run(['acip', 'fixture:attracting_everywhere', '--limit', '3']) == EXIT_REFUSED
        error = _error(capsys.readouterr().err)
        assert error["code"] == EXIT_REFUSED
        assert error["message"].startswith('no expansion certificate')

    @pytest.mark.asyncio
    async def test_missing_map(self, tmp_path, capsys):
        assert await run(['orbits', str(tmp_path / 'missing.map')]) == EXIT_INPUT_ERROR
        error = _error(capsys.readouterr().err)
        assert error["code"] == EXIT_INPUT_ERROR
        assert error["stacktrace"], "Input errors carry the stacktrace"

    @pytest.mark.asyncio
    async def test_invalid_map(self, tmp_path, capsys):
        document = tmp_path / 'broken.map'
        document.write_text('domain 0 1\nbreakpoints 1/2\nbranch 0 affine slope=2 intercept=0\n'
                            'branch 1 affine slope=-2 intercept=3\n')
        assert await run(['classify', str(document)]) == EXIT_INPUT_ERROR
        assert 'disagree' in _error(capsys.readouterr().err)["message"]

    @pytest.mark.asyncio
    @pytest.mark.parametrize("argv", [
        [],
        ['bogus'],
        ['kn', 'fixture:tent', '--nmax', 'three'],
        ['kn', 'fixture:tent', '--mode', 'float'],
        ['mane', 'fixture:tent', '--avoid', '1,2,3'],
        ['kn', 'fixture:unknown'],
        ['omega', 'fixture:tent', '--seed-point', '5'],
    ])
    async def test_usage_errors(self, argv, capsys):
        assert await run(argv) == EXIT_INPUT_ERROR
        assert _error(capsys.readouterr().err)["code"] == EXIT_INPUT_ERROR

    def test_main_exits(self, monkeypatch, capsys):
        monkeypatch.setattr(sys, 'argv', ['imdyn', 'expand', 'fixture:tent'])
        with pytest.raises(SystemExit) as exit_info:
            main()
        assert exit_info.value.code == EXIT_OK
        assert capsys.readouterr().out.splitlines()[-1] == 'N=1 min_expansion=2'
