"""Regenerate the bundled benchmark corpus from the circuitgraph wheel.

    pip download circuitgraph==0.2.1 --no-deps -d /tmp/cg
    python tools/build_corpus.py /tmp/cg/circuitgraph-0.2.1-py3-none-any.whl
"""

import json
import sys
import zipfile
from pathlib import Path

from split3d.netlist import levels, parse_bench, parse_verilog, to_bench

DATA = Path(__file__).resolve().parents[1] / "src" / "split3d" / "corpus" / "data"
ISCAS = ["c17", "c432", "c880", "c1355", "c3540"]
ITC = {"b17_C": "b17_C.bench"}


def main(wheel):
    zf = zipfile.ZipFile(wheel)
    manifest = []
    for name in ISCAS:
        src = zf.read(f"circuitgraph/netlists/{name}.v").decode()
        netlist = parse_verilog(src, name)
        _write(name, to_bench(netlist), "ISCAS-85", manifest)
    for name, fname in ITC.items():
        src = zf.read(f"circuitgraph/netlists/{fname}").decode()
        netlist = parse_bench(src, name)
        _write(name, to_bench(netlist), "ITC-99 (combinational core)", manifest)
    (DATA / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _write(name, text, suite, manifest):
    (DATA / f"{name}.bench").write_text(text)
    netlist = parse_bench(text, name)
    depth = max(levels(netlist).values())
    manifest.append({
        "name": name,
        "suite": suite,
        "file": f"{name}.bench",
        "gates": len(netlist.gates),
        "inputs": len(netlist.inputs),
        "outputs": len(netlist.outputs),
        "depth": depth,
        "source": "circuitgraph 0.2.1 (MIT), netlists/",
    })
    print(name, len(netlist.gates), len(netlist.inputs), len(netlist.outputs), depth)


if __name__ == "__main__":
    main(sys.argv[1])
