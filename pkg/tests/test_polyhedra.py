"""Template-polyhedra invariants with exact Farkas certificates."""

from fractions import Fraction

import pytest

from cisynth.polyhedra import (Polyhedron, AffineMode, FarkasCertificate,
                               SynthesisFailure, octagon_directions,
                               check_positive_invariant, certify,
                               verify_certificate, halfspace_multipliers,
                               synth_rho, slice_interval)

F = Fraction


def box(lo, hi):
    return Polyhedron(octagon_directions(4),
                      (F(hi), F(hi), F(-lo), F(-lo)))


STABLE = AffineMode(  # x' = -x, y' = -y: every centered box is invariant
    a_matrix=((F(-1), F(0)), (F(0), F(-1))),
    b_vector=(F(0), F(0)),
    domain=())

DRIFT = AffineMode(  # x' = 1: no bounded box is invariant
    a_matrix=((F(0), F(0)), (F(0), F(0))),
    b_vector=(F(1), F(0)),
    domain=())


def test_octagon_directions():
    assert len(octagon_directions(4)) == 4
    assert len(octagon_directions(8)) == 8
    with pytest.raises(ValueError):
        octagon_directions(6)


def test_contains():
    p = box(-1, 1)
    assert p.contains((F(1), F(-1)))
    assert not p.contains((F(1), F(-2)))


def test_positive_invariant_linear():
    p = box(-1, 1)
    h = check_positive_invariant(p, STABLE.a_matrix)
    assert h is not None
    # rotation leaves the unit box: corners move outside, no witness H
    rot = ((F(0), F(-1)), (F(1), F(0)))
    assert check_positive_invariant(p, rot) is None


def test_certify_stable_box():
    cert = certify(box(-1, 1), STABLE)
    assert isinstance(cert, FarkasCertificate)
    assert verify_certificate(box(-1, 1), STABLE, cert)


def test_certify_rejects_drift():
    assert certify(box(-1, 1), DRIFT) is None


def test_certify_drift_with_domain_gate():
    # x' = 1 escapes every box, but the open mode domain x < 0 makes the
    # facet x = 0 vacuous; y' = -y - 1/2 points strictly inward on both
    # y facets of the box [-1, 0] x [-1, 0]
    gated = AffineMode(((F(0), F(0)), (F(0), F(-1))),
                       (F(1), F(-1, 2)),
                       domain=(((F(1), F(0)), F(0)),))
    p = box(-1, 0)
    cert = certify(p, gated)
    assert cert is not None and verify_certificate(p, gated, cert)


def test_verify_certificate_rejects_tampering():
    cert = certify(box(-1, 1), STABLE)
    bad = FarkasCertificate(cert.h_matrix,
                            tuple(e + 1 for e in cert.eta),
                            cert.xi, cert.lam)
    assert not verify_certificate(box(-1, 1), STABLE, bad)


def test_halfspace_multipliers():
    dirs = octagon_directions(8)
    y = halfspace_multipliers(dirs, (F(1), F(1)))
    assert y is not None and all(v >= 0 for v in y)
    # y Q = c exactly
    for col in range(2):
        assert sum(y[j] * dirs[j][col] for j in range(8)) == 1


def test_synth_rho_grows_stable_box():
    # start from a small certifiable box and let the offsets grow toward
    # the safe region |x| <= 10, |y| <= 10
    dirs = octagon_directions(4)
    safe = [((F(1), F(0)), F(10)), ((F(-1), F(0)), F(10)),
            ((F(0), F(1)), F(10)), ((F(0), F(-1)), F(10))]
    p, cert = synth_rho(dirs, STABLE, safe, (F(1), F(1), F(1), F(1)),
                        rounds=6)
    assert verify_certificate(p, STABLE, cert)
    assert all(r >= 1 for r in p.rho)
    assert all(r <= 10 for r in p.rho)


def test_synth_rho_rejects_uncertifiable_seed():
    dirs = octagon_directions(4)
    safe = [((F(1), F(0)), F(10))]
    with pytest.raises(SynthesisFailure):
        synth_rho(dirs, DRIFT, safe, (F(1), F(1), F(1), F(1)))


def test_slice_interval():
    # octagon |x| <= 2, |y| <= 2, |x + y| <= 3, |x - y| <= 3
    p = Polyhedron(octagon_directions(8),
                   (F(2), F(3), F(2), F(3), F(2), F(3), F(2), F(3)))
    got = slice_interval(p, {0: F(2)}, 1)
    assert got == (F(-1), F(1))
    got = slice_interval(p, {0: F(0)}, 1)
    assert got == (F(-2), F(2))
    assert slice_interval(p, {0: F(5)}, 1) is None
