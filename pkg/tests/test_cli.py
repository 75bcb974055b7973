"""Command-line interface, driven in-process through main(argv)."""

import json

import pytest

from convforge.cli import main
from convforge.netparse import parse_network, validate, pack_weights
from convforge.simulate.image_io import pack_him
from convforge.synth import random_weights

TOPOLOGY = """\
name: "cli_net"
input: "data"
input_dim: 1
input_dim: 1
input_dim: 6
input_dim: 6
layer {
  name: "c0"
  type: "Convolution"
  bottom: "data"
  top: "c0"
  convolution_param {
    num_output: 2
    kernel_size: 3
  }
}
layer {
  name: "p0"
  type: "Pooling"
  bottom: "c0"
  top: "p0"
  pooling_param {
    pool: MAX
    kernel_size: 2
    stride: 2
  }
}
layer {
  name: "t0"
  type: "TanH"
  bottom: "p0"
  top: "t0"
}
"""


@pytest.fixture
def topo(tmp_path):
    path = tmp_path / "net.prototxt"
    path.write_text(TOPOLOGY)
    return str(path)


def test_check_reports_chain_and_ok(topo, capsys):
    assert main(["check", topo]) == 0
    out = capsys.readouterr().out
    assert "network cli_net: input 1x6x6" in out
    assert "chain: 6 -> 4 -> 2" in out
    assert out.rstrip().endswith("OK")


def test_check_with_weights_file(topo, tmp_path, capsys):
    vnet = validate(parse_network(TOPOLOGY))
    blob = pack_weights(random_weights(vnet.net, seed=1))
    wpath = tmp_path / "w.hwf"
    wpath.write_bytes(blob)
    assert main(["check", topo, "--weights", str(wpath)]) == 0
    assert "weights: ok (1 blocks)" in capsys.readouterr().out


def test_missing_topology_file_is_an_error(tmp_path, capsys):
    missing = str(tmp_path / "nope.prototxt")
    assert main(["check", missing]) == 1
    err = capsys.readouterr().err
    assert "error:" in err and "nope.prototxt" in err


def test_syntax_error_reports_line(topo, tmp_path, capsys):
    bad = tmp_path / "bad.prototxt"
    bad.write_text(TOPOLOGY.replace("kernel_size: 3", "pad: 1"))
    assert main(["check", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "error:" in err and "pad" in err


def test_stats_text_and_json(topo, capsys):
    assert main(["stats", topo, "--seed", "3"]) == 0
    text = capsys.readouterr().out
    assert "zero" in text
    assert main(["stats", topo, "--seed", "3", "--json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert set(d) >= {"zero", "one", "pow2", "other"}


def test_graph_dump(topo, capsys):
    assert main(["graph", topo]) == 0
    out = capsys.readouterr().out
    assert out.startswith("graph cli_net input 1x6x6")
    assert "actors:" in out


def test_simulate_bit_exact(topo, capsys):
    assert main(["simulate", topo, "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert "block 0: 2x2x2  max diff 0" in out
    assert "BIT-EXACT: yes" in out


def test_simulate_engine_choices(topo, capsys):
    assert main(["simulate", topo, "--engine", "pure"]) == 0
    assert "BIT-EXACT: yes" in capsys.readouterr().out


def test_simulate_with_image_file(topo, tmp_path, capsys):
    reals = [x / 40.0 for x in range(-18, 18)]
    blob = pack_him((1, 6, 6), reals)
    ipath = tmp_path / "img.him"
    ipath.write_bytes(blob)
    assert main(["simulate", topo, "--image", str(ipath)]) == 0
    assert "BIT-EXACT: yes" in capsys.readouterr().out


def test_simulate_missing_image(topo, tmp_path, capsys):
    assert main(["simulate", topo, "--image",
                 str(tmp_path / "void.him")]) == 1
    assert "void.him" in capsys.readouterr().err


def test_emit_writes_bundle(topo, tmp_path, capsys):
    out_dir = tmp_path / "hdl"
    assert main(["emit", topo, "--out", str(out_dir)]) == 0
    out = capsys.readouterr().out
    assert "top entity: cli_net" in out
    assert "port" in out  # manifest follows
    files = sorted(p.name for p in out_dir.iterdir())
    assert files == ["c0.vhd", "cli_net.vhd", "cli_net_pkg.vhd"]
    text = (out_dir / "cli_net.vhd").read_bytes()
    assert b"\r" not in text


def test_emit_deterministic_across_runs(topo, tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    assert main(["emit", topo, "--out", str(d1)]) == 0
    assert main(["emit", topo, "--out", str(d2)]) == 0
    for p in d1.iterdir():
        assert p.read_bytes() == (d2 / p.name).read_bytes()


def test_estimate_json_and_compare(topo, capsys):
    assert main(["estimate", topo, "--json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["total"]["dsp_blocks"] == 0
    assert main(["estimate", topo, "--compare", "--seed", "5"]) == 0
    assert "multiplier units" in capsys.readouterr().out


def test_no_specialize_keeps_generic_multipliers(topo, capsys):
    assert main(["estimate", topo, "--json", "--no-specialize"]) == 0
    plain = json.loads(capsys.readouterr().out)
    assert main(["estimate", topo, "--json"]) == 0
    spec = json.loads(capsys.readouterr().out)
    assert plain["total"]["mult_units"] >= spec["total"]["mult_units"]
    assert plain["blocks"][0]["mult"]["zero"] == 0


def test_flag_range_validation(topo, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", topo, "--data-bits", "1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", topo, "--tanh-bits", "13"])
    assert exc.value.code == 2


def test_version_banner(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert out.startswith("convforge 0.")
    assert "VHDL-93" in out


def test_subcommand_required(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
