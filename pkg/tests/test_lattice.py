import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_channel
from ostbc.codes import BUILTIN_NAMES, builtin, encode
from ostbc.lattice import (
    ChannelRealization, LinearForm, build_check_H, build_F, build_F_prime, channel_from_real_vector,
    format_symbolic, lattice_basis, parse_linear_form, permutations, real_channel_vector, sigma,
    symbolic_check_H, vectorize_received,
)
from _golden import GOLDEN


def test_real_channel_index_rule(rng):
    N, M = 3, 2
    H = random_channel(rng, N, M)
    h = real_channel_vector(H)
    for i in range(1, N + 1):
        for j in range(1, M + 1):
            idx = 2 * i - 1 + 2 * (j - 1) * N
            assert h[idx - 1] == H[i - 1, j - 1].real
            assert h[idx] == H[i - 1, j - 1].imag


def test_channel_vector_roundtrip(rng):
    H = random_channel(rng, 4, 3)
    assert np.array_equal(channel_from_real_vector(real_channel_vector(H), 4, 3), H)


def test_received_vector_is_interleaved():
    Y = np.array([[1 + 2j, 5 + 6j], [3 + 4j, 7 + 8j]])
    assert vectorize_received(Y).tolist() == [1, 2, 3, 4, 5, 6, 7, 8]


def test_channel_realization_is_read_only(rng):
    ch = ChannelRealization(random_channel(rng, 2, 1))
    with pytest.raises(ValueError):
        ch.H[0, 0] = 0


@pytest.mark.parametrize("M", [1, 2, 3])
def test_permutations_are_bijections(spec, M):
    perm_y, perm_s = permutations(M, spec.T, spec.K)
    assert sorted(perm_y) == list(range(2 * M * spec.T))
    assert sorted(perm_s) == list(range(2 * spec.K))


@pytest.mark.parametrize("M", [1, 2])
def test_lattice_model_reproduces_channel_output(spec, M, rng):
    """``y_check = H_check x`` for the noiseless received block ``Y = G H``."""
    H = random_channel(rng, spec.N, M)
    s = rng.standard_normal(spec.K) + 1j * rng.standard_normal(spec.K)
    system = build_check_H(spec, H)
    x = np.column_stack((s.real, s.imag)).ravel()
    assert np.allclose(system.check_H @ x, vectorize_received(encode(spec, s) @ H), atol=1e-12)


@pytest.mark.parametrize("M", [1, 2])
def test_complex_model(spec, M, rng):
    H = random_channel(rng, spec.N, M)
    s = rng.standard_normal(spec.K) + 1j * rng.standard_normal(spec.K)
    Fa, Fb = build_F(spec, H)
    y = (encode(spec, s) @ H).T.ravel()
    assert np.allclose(Fa @ s.real + Fb @ s.imag, y)
    energy = spec.c * np.sum(np.abs(H) ** 2)
    F = np.hstack((Fa, Fb))
    assert np.allclose((F.conj().T @ F).real, energy * np.eye(2 * spec.K), atol=1e-10)
    Fp = build_F_prime(Fa, Fb)
    assert np.allclose(Fp.T @ Fp, energy * np.eye(2 * spec.K), atol=1e-10)


@pytest.mark.parametrize("M", [1, 2])
def test_orthogonality_and_sigma(spec, M, rng):
    for _ in range(20):
        H = random_channel(rng, spec.N, M)
        system = build_check_H(spec, H)
        s = system.sigma
        assert s == pytest.approx(spec.c * np.sum(np.abs(H) ** 2), abs=1e-12)
        assert sigma(spec, H) == s
        assert np.max(np.abs(system.check_H.T @ system.check_H - s * np.eye(2 * spec.K))) < 1e-10


@pytest.mark.parametrize("M", [1, 2])
def test_symbolic_matches_numeric(spec, M, rng):
    H = random_channel(rng, spec.N, M)
    system = build_check_H(spec, H)
    assert np.allclose(system.evaluate_symbolic(), system.check_H, atol=1e-14)
    h = real_channel_vector(H)
    assert np.allclose(np.tensordot(h, lattice_basis(spec, M), axes=1), system.check_H, atol=1e-14)


def test_symbolic_first_column_is_channel_vector(spec):
    """The first column is ``h`` itself, interleaved per receive antenna and period."""
    col = [row[0] for row in symbolic_check_H(spec, 1)]
    assert col[0] == LinearForm.symbol(1)
    assert col[1] == LinearForm.symbol(2)


def test_zero_channel_gives_zero_sigma():
    system = build_check_H(builtin("G2"), np.zeros((2, 1)))
    assert system.sigma == 0.0


def test_alamouti_symbolic():
    text = [[format_symbolic(f) for f in row] for row in symbolic_check_H(builtin("G2"), 1)]
    assert text == [
        ["h1", "-h2", "h3", "-h4"],
        ["h2", "h1", "h4", "h3"],
        ["h3", "h4", "-h1", "-h2"],
        ["h4", "-h3", "-h2", "h1"],
    ]


@pytest.mark.parametrize("text", ["0", "h1", "-h12", "h5/sqrt2", "-(h1+h3)/sqrt2", "(-h1+h3)/sqrt2",
                                  "(h2-h4)/sqrt2", "(h1+h2)/2"])
def test_format_parse_roundtrip(text):
    assert format_symbolic(parse_linear_form(text)) == text


@settings(max_examples=50)
@given(st.dictionaries(st.integers(1, 12), st.sampled_from(["1", "-1", "1/sqrt2", "-1/sqrt2"]), max_size=4))
def test_parse_inverts_format(terms):
    from ostbc.codes import Coefficient

    flags = {w.endswith("sqrt2") for w in terms.values()}
    if len(flags) > 1:
        terms = {i: w.replace("/sqrt2", "") for i, w in terms.items()}
    form = LinearForm({i: Coefficient.parse(w) for i, w in terms.items()})
    assert parse_linear_form(format_symbolic(form)) == form


@pytest.mark.parametrize("name", BUILTIN_NAMES)
@pytest.mark.parametrize("M", [1, 2])
def test_lattice_snapshot(name, M):
    path = GOLDEN / f"lattice_{name}_M{M}.txt"
    rows = [" ".join(format_symbolic(f) for f in row) for row in symbolic_check_H(builtin(name), M)]
    assert "\n".join(rows) + "\n" == path.read_text()


def _block_is_conformal(block) -> bool:
    (a, b), (c, d) = block
    return (a == d and b == -c) or (a == -d and b == c)


@pytest.mark.parametrize("name", ["G2", "G3", "G4"])
@pytest.mark.parametrize("M", [1, 2])
def test_unit_entry_codes_have_conformal_blocks(name, M):
    """With entries +-s_k or +-s_k^*, every 2x2 block is [[a,-b],[b,a]] or [[a,b],[b,-a]]."""
    Hs = symbolic_check_H(builtin(name), M)
    for r in range(0, len(Hs), 2):
        for k in range(0, len(Hs[0]), 2):
            assert _block_is_conformal([Hs[r][k:k + 2], Hs[r + 1][k:k + 2]])


def test_g4_reference_rows_are_not_realizable():
    """Two displayed 2x2 blocks of the four-antenna reference cannot come from any +-s/+-s^* entry."""
    from _golden import load_reference

    _, rows = load_reference("reference_G4_M1.txt")
    assert not _block_is_conformal([rows[1][6:8], rows[2][6:8]])
    assert not _block_is_conformal([rows[15][2:4], rows[16][2:4]])


def test_h3_reference_is_not_orthogonal(rng):
    from _golden import load_reference

    shape, rows = load_reference("reference_H3_M1.txt")
    h = rng.standard_normal(6)
    ref = np.array([[f.evaluate(h) for f in rows[r]] for r in range(1, shape[0] + 1)])
    gram = ref.T @ ref
    assert abs(gram[1, 4]) > 1e-3
    ours = np.array([[f.evaluate(h) for f in row] for row in symbolic_check_H(builtin("H3"), 1)])
    assert np.allclose(ours.T @ ours, gram[0, 0] * np.eye(6))
