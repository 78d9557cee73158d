"""Reading reference lattice files and comparing them with generated ones."""

from pathlib import Path

from ostbc.lattice import parse_linear_form

GOLDEN = Path(__file__).parent / "golden"


def load_reference(name: str):
    """Return ``(shape, {row: [LinearForm, ...]})`` from a ``reference_*.txt`` file."""
    shape, rows = None, {}
    for line in (GOLDEN / name).read_text().splitlines():
        line = line.strip()
        if line.startswith("#"):
            fields = dict(f.split("=") for f in line[1:].split() if "=" in f)
            if "rows" in fields:
                shape = (int(fields["rows"]), int(fields["cols"]))
            continue
        if line:
            idx, body = line.split(":", 1)
            rows[int(idx)] = [parse_linear_form(t) for t in body.split()]
    return shape, rows


def compare_reference(symbolic, shape, rows):
    """Match displayed rows entry for entry.

    Exact comparison first; failing that, each column may be negated as a
    whole.  Returns ``(mode, mismatches)`` with mode ``"exact"``,
    ``"column-sign"`` or ``None`` and mismatches as ``(row, col, ours, ref)``.
    """
    if (len(symbolic), len(symbolic[0])) != shape:
        return None, [("shape", (len(symbolic), len(symbolic[0])), shape)]
    exact = [(r, j + 1, symbolic[r - 1][j], f) for r, ref in rows.items()
             for j, f in enumerate(ref) if symbolic[r - 1][j] != f]
    if not exact:
        return "exact", []
    signs_ok = True
    for j in range(shape[1]):
        pairs = [(symbolic[r - 1][j], ref[j]) for r, ref in rows.items()]
        if not (all(a == b for a, b in pairs) or all(a == -b for a, b in pairs)):
            signs_ok = False
    return ("column-sign", []) if signs_ok else (None, exact)
