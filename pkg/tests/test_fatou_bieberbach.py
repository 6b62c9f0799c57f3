import json
import math

import numpy as np
import pytest

from contactfb.fatou_bieberbach import (
    EXPONENT_CAP,
    EpsSchedule,
    PushOutState,
    SelectionError,
    SelectionWitness,
    ShearFunction,
    ShearMap,
    StageSchedule,
    build_pushout,
    build_shear_round,
    compose_orbit,
    desk_schedule,
    enclose_degenerate,
    fb_map_eval,
    omega_membership,
    orbit_logs_batch,
    select_exponent,
    state_from_dict,
    state_to_dict,
)
from contactfb.numeric import NEG_INF, ScaledComplex
from contactfb.obstacle import ShellUnion, contains


# reference schedule: one shell (a, b) = (2, 4) with disk height 1,
# base disk radius 1, term radius pinned at 1.5
REF = StageSchedule(log_base=0.0, log_a=(math.log(2.0),),
                    log_b=(math.log(4.0),), log_offset=(0.0,),
                    log_offset_base=NEG_INF, log_r=(math.log(1.5),))


class TestShearFunction:
    def test_zero_function(self):
        f = ShearFunction(())
        assert f.is_zero
        assert f.sup_log(3.0) == NEG_INF
        assert f.eval_scaled(ScaledComplex.from_complex(2.0)).is_zero

    def test_single_term_value(self):
        f = ShearFunction(((math.log(1.5), 6),))
        got = f.eval_scaled(ScaledComplex.from_complex(2.5)).to_complex()
        want = (2.5 / 1.5) ** 6
        assert got == pytest.approx(want, rel=1e-12)

    def test_sup_log_is_coefficient_sum(self):
        f = ShearFunction(((math.log(1.5), 2), (math.log(3.0), 5)))
        R = 4.0
        want = (R / 1.5) ** 2 + (R / 3.0) ** 5
        assert math.exp(f.sup_log(math.log(R))) == pytest.approx(want, rel=1e-12)

    def test_scaled_matches_native(self):
        f = ShearFunction(((math.log(1.5), 3), (math.log(2.5), 7)))
        rng = np.random.default_rng(4)
        for _ in range(25):
            z = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            if z == 0:
                continue
            got = f.eval_scaled(ScaledComplex.from_complex(z)).to_complex()
            want = complex(f.eval_native(z))
            assert got == pytest.approx(want, rel=1e-10)

    def test_logpolar_matches_scaled(self):
        f = ShearFunction(((math.log(1.5), 3), (math.log(2.5), 7)))
        rng = np.random.default_rng(9)
        lm = rng.uniform(-1.0, 2.0, size=10)
        ph = rng.uniform(-math.pi, math.pi, size=10)
        out_lm, out_ph = f.eval_logpolar(lm, ph)
        for i in range(10):
            z = ScaledComplex(float(lm[i]), float(ph[i]))
            w = f.eval_scaled(z)
            assert out_lm[i] == pytest.approx(float(w.log_mag), rel=1e-12)
            assert math.cos(out_ph[i]) == pytest.approx(math.cos(w.phase),
                                                        abs=1e-10)

    def test_exponent_order_enforced(self):
        with pytest.raises(ValueError, match="nondecreasing"):
            ShearFunction(((0.0, 5), (0.0, 3)))
        with pytest.raises(ValueError, match=">= 1"):
            ShearFunction(((0.0, 0),))

    def test_derivative_value(self):
        # f = (z/2)^3: f'(z) = 3 z^2 / 8
        f = ShearFunction(((math.log(2.0), 3),))
        z = 1.5 + 0.5j
        assert complex(f.deriv_native(z)) == pytest.approx(3 * z ** 2 / 8,
                                                           rel=1e-12)


class TestShearMap:
    F = ShearFunction(((math.log(1.5), 6),))

    def test_phi_action(self):
        m = ShearMap("phi", 2, self.F)
        out = m.apply_scaled([ScaledComplex.from_complex(2.5),
                              ScaledComplex.zero()])
        assert out[0].to_complex() == 2.5
        assert out[1].to_complex() == pytest.approx((2.5 / 1.5) ** 6, rel=1e-12)

    def test_psi_action(self):
        m = ShearMap("psi", 2, self.F)
        out = m.apply_scaled([ScaledComplex.zero(),
                              ScaledComplex.from_complex(2.5)])
        assert out[0].to_complex() == pytest.approx((2.5 / 1.5) ** 6, rel=1e-12)
        assert out[1].to_complex() == 2.5

    @pytest.mark.parametrize("kind,dim", [("phi", 2), ("psi", 2),
                                          ("phi", 3), ("psi", 3)])
    def test_inverse_round_trip(self, kind, dim):
        m = ShearMap(kind, dim, self.F)
        rng = np.random.default_rng(17)
        for _ in range(20):
            p = [ScaledComplex.from_complex(complex(a, b))
                 for a, b in zip(rng.uniform(-2, 2, dim),
                                 rng.uniform(-2, 2, dim))]
            q = m.inverse_apply_scaled(m.apply_scaled(p))
            for a, b in zip(p, q):
                assert a.to_complex() == pytest.approx(b.to_complex(),
                                                       rel=1e-12, abs=1e-12)

    def test_jacobian_unit_determinant(self):
        for kind in ("phi", "psi"):
            m = ShearMap(kind, 3, self.F)
            vec = np.array([1.2 + 0.3j, -0.7j, 0.4 + 0j])
            det = np.linalg.det(m.jacobian(vec))
            assert det == pytest.approx(1.0, rel=1e-14)

    def test_kind_validation(self):
        with pytest.raises(ValueError):
            ShearMap("chi", 2, self.F)
        with pytest.raises(ValueError):
            ShearMap("phi", 1, self.F)


class TestSelectExponent:
    def test_reference_example(self):
        # b0=1, r=1.5, (a, b)=(2, 4), heights c0=0, c1=1, eps=1/2, empty
        # partial sum: tail control needs (1/1.5)^N < 1/8 -> N >= 6 and
        # pinching needs (2/1.5)^N > 3.5 -> N >= 5, so N = 6
        w = select_exponent(1, REF, ShearFunction(()), eps=0.5)
        assert w.N == 6
        assert w.log_r == math.log(1.5)
        assert math.exp(w.M_log) == pytest.approx(2.0, rel=1e-12)

    def test_witness_sandwich_and_slacks(self):
        w = select_exponent(1, REF, ShearFunction(()), eps=0.5)
        assert w.beta_prev_log < w.M_log < w.alpha_log
        assert all(v > 0 for v in w.slacks.values())
        # explicit band values: beta0 = 1/4, alpha1 = (4/3)^6 - 1 - 1/4
        assert math.exp(w.beta_prev_log) == pytest.approx(0.25, rel=1e-12)
        assert math.exp(w.alpha_log) == pytest.approx(
            (4.0 / 3.0) ** 6 - 1.25, rel=1e-12)

    def test_larger_exponent_still_admissible(self):
        # both certified inequalities are monotone in N, so any exponent
        # above the minimal one satisfies them as well
        w = select_exponent(1, REF, ShearFunction(()), eps=0.5)
        for N in (w.N, w.N + 1, w.N + 5):
            assert (1.0 / 1.5) ** N < 0.5 * 2.0 ** -2
            assert (2.0 / 1.5) ** N > math.exp(w.M_log) + 1.0 + 0.5

    def test_minimality(self):
        w = select_exponent(1, REF, ShearFunction(()), eps=0.5)
        N = w.N - 1
        tail_ok = (1.0 / 1.5) ** N < 0.5 * 2.0 ** -2
        pinch_ok = (2.0 / 1.5) ** N > math.exp(w.M_log) + 1.0 + 0.5
        assert not (tail_ok and pinch_ok)

    def test_min_exponent_floor(self):
        w = select_exponent(1, REF, ShearFunction(()), eps=0.5,
                            min_exponent=11)
        assert w.N == 11

    def test_cap_raises_with_binding(self):
        with pytest.raises(SelectionError) as ei:
            select_exponent(1, REF, ShearFunction(()), eps=0.5,
                            exponent_cap=3)
        assert ei.value.shell_index == 1
        assert ei.value.binding in ("tail-control", "pinching")

    def test_input_validation(self):
        with pytest.raises(ValueError, match="out of range"):
            select_exponent(2, REF, ShearFunction(()), eps=0.5)
        with pytest.raises(ValueError, match="positive"):
            select_exponent(1, REF, ShearFunction(()), eps=0.0)


class TestStageSchedule:
    def test_interleaving_enforced(self):
        with pytest.raises(ValueError, match="interleaved"):
            StageSchedule(log_base=0.0, log_a=(1.0, 0.5), log_b=(2.0, 3.0),
                          log_offset=(0.0, 0.0))

    def test_auto_radius_between_bands(self):
        s = StageSchedule(log_base=0.0, log_a=(5.0, 50.0),
                          log_b=(10.0, 60.0), log_offset=(0.0, 0.0))
        assert 0.0 < s.log_r[0] < 5.0
        assert 10.0 < s.log_r[1] < 50.0

    def test_explicit_radius_validated(self):
        bad = StageSchedule(log_base=0.0, log_a=(1.0,), log_b=(2.0,),
                            log_offset=(0.0,), log_r=(3.0,))
        with pytest.raises(ValueError, match="must satisfy"):
            select_exponent(1, bad, ShearFunction(()), eps=0.5)

    def test_from_shell_union_offsets(self):
        K = ShellUnion.from_linear([(2, 4, 100)], (0,), 1)
        s2 = StageSchedule.from_shell_union(K, 0.0, 2)
        assert s2.log_offset[0] == pytest.approx(math.log(100.0))
        K3 = ShellUnion.from_linear([(2, 4, 1)], (0, 1), 2)
        s3 = StageSchedule.from_shell_union(K3, 0.0, 3)
        # for dim > 2 a shifted coordinate may carry up to max(b, c)
        assert s3.log_offset[0] == pytest.approx(math.log(4.0))


class TestEpsSchedule:
    def test_values(self):
        s = EpsSchedule()
        assert s.eps(1) == 0.25
        assert s.eps(3) == 0.0625
        assert s.tail(0) == 0.5
        assert s.tail(2) == 0.125
        # tail really bounds the sum of all later eps
        assert sum(s.eps(k) for k in range(3, 60)) <= s.tail(2)

    def test_base_validation(self):
        with pytest.raises(ValueError):
            EpsSchedule(base=1.0)
        with pytest.raises(ValueError):
            EpsSchedule(base=0.0)


class TestDeskSchedule:
    def test_band_values(self):
        K = desk_schedule(2, 3)
        want = [(1.8 * 2 ** (i - 1), 2.2 * 2 ** (i - 1), 2.0 ** (3 * i + 1))
                for i in (1, 2, 3)]
        for got, w in zip(K.linear_shells(), want):
            assert got == pytest.approx(w, rel=1e-12)

    def test_dim3_layout(self):
        K = desk_schedule(3, 2)
        assert K.shell_dims == (0, 1) and K.disk_dim == 2

    def test_enclosure_validation(self):
        K = ShellUnion.from_linear([(1, 1, 5)], (0,), 1)
        with pytest.raises(ValueError):
            enclose_degenerate(K, widen=1.5)
        with pytest.raises(ValueError, match="a_1 > 1"):
            enclose_degenerate(K, widen=0.1, dilation=1.0)
        with pytest.raises(ValueError, match="interleave"):
            enclose_degenerate(ShellUnion.from_linear(
                [(1, 1, 5), (1.05, 1.05, 10)], (0,), 1), widen=0.1)


@pytest.fixture(scope="module")
def built_state():
    return build_pushout(desk_schedule(2, 4), dim=2, k_max=3)


def _sample_shell_points(K, count, rng, dim):
    """Random points inside a vertical shell union, one shell at a time."""
    pts = []
    shells = K.shells
    for _ in range(count):
        s = shells[rng.integers(len(shells))]
        lm = rng.uniform(s.log_a, s.log_b)
        ph = rng.uniform(-math.pi, math.pi)
        p = [ScaledComplex(lm, ph)]
        for _ in range(dim - 2):
            p.append(ScaledComplex(lm - rng.uniform(0.5, 2.0),
                                   rng.uniform(-math.pi, math.pi)))
        lz = s.log_c - rng.uniform(0.5, 3.0)
        p.append(ScaledComplex(lz, rng.uniform(-math.pi, math.pi)))
        pts.append(p)
    return pts


class TestRoundContracts:
    def test_exponents_below_cap(self, built_state):
        for r in built_state.rounds:
            for w in r.phi_witnesses + r.psi_witnesses:
                assert w.N <= EXPONENT_CAP

    def test_identity_bound_certified(self, built_state):
        for r in built_state.rounds:
            assert 0 < r.id_bound < r.eps
            assert r.eps == built_state.eps_schedule.eps(r.index)

    def test_disjointness_from_next_polydisk(self, built_state):
        for r in built_state.rounds:
            assert r.shells_after.shells[0].log_a > math.log(r.index + 1.0)

    def test_containment_sampled(self, built_state):
        rng = np.random.default_rng(23)
        for r in built_state.rounds:
            pts = _sample_shell_points(r.shells_before, 40, rng,
                                       built_state.dim)
            for p in pts:
                mid = r.phi.apply_scaled(p)
                assert contains(r.shells_mid, mid)
                out = r.psi.apply_scaled(mid)
                assert contains(r.shells_after, out)

    def test_identity_bound_sampled(self, built_state):
        rng = np.random.default_rng(31)
        for r in built_state.rounds:
            radius = float(r.index)
            for _ in range(40):
                lm = math.log(radius) - rng.uniform(0.0, 5.0)
                p = [ScaledComplex(lm + rng.uniform(-1, 0),
                                   rng.uniform(-math.pi, math.pi))
                     for _ in range(built_state.dim)]
                q = r.apply_scaled(p)
                diff = max(abs(a.to_complex() - b.to_complex())
                           for a, b in zip(p, q))
                assert diff < r.eps

    def test_witness_sandwiches(self, built_state):
        for r in built_state.rounds:
            for w in r.phi_witnesses + r.psi_witnesses:
                assert w.beta_prev_log < w.M_log < w.alpha_log
                assert all(v > 0 for v in w.slacks.values())


class TestOrbits:
    def test_origin_stays_bounded(self, built_state):
        p = [0j, 0j]
        rec = compose_orbit(built_state, p)
        assert rec.classification == "bounded-so-far"
        assert rec.first_escape is None
        assert all(lm == NEG_INF for lm in rec.log_maxnorms)

    def test_shell_point_escapes(self, built_state):
        p = [2.0 + 0j, 0j]  # on the innermost initial shell
        rec = compose_orbit(built_state, p)
        assert rec.classification == "escaped"
        assert rec.first_escape is not None
        # log max-norms increase monotonically once escaped
        logs = rec.log_maxnorms
        assert all(a < b for a, b in zip(logs, logs[1:]))

    def test_batch_matches_scalar(self, built_state):
        rng = np.random.default_rng(7)
        pts = [[complex(a, b), complex(c, d)]
               for a, b, c, d in rng.uniform(-3, 3, size=(12, 4))]
        batch = orbit_logs_batch(built_state, pts)
        for row, p in zip(batch, pts):
            rec = compose_orbit(built_state, p)
            for got, want in zip(row, rec.log_maxnorms):
                assert got == pytest.approx(want, rel=1e-9, abs=1e-9)

    def test_membership_origin_certified(self, built_state):
        assert omega_membership(built_state, [0j, 0j]) == "in_omega_certified"
        assert omega_membership(built_state,
                                [1e-3 + 0j, 1e-3j]) == "in_omega_certified"

    def test_membership_shell_escaped(self, built_state):
        assert omega_membership(built_state, [2.0 + 0j, 0j]) == "escaped"

    def test_fb_map_eval_origin(self, built_state):
        value, err = fb_map_eval(built_state, [0j, 0j])
        assert value == (0j, 0j)
        assert err == built_state.eps_schedule.tail(built_state.k)

    def test_fb_map_eval_small_point_stays_small(self, built_state):
        value, err = fb_map_eval(built_state, [1e-3 + 0j, 0j])
        drift = max(abs(v) for v in value)
        assert drift < 1e-3 + sum(r.eps for r in built_state.rounds)

    def test_fb_map_eval_rejects_uncertified(self, built_state):
        with pytest.raises(ValueError, match="not certified"):
            fb_map_eval(built_state, [2.0 + 0j, 0j])

    def test_cauchy_differences(self, built_state):
        # partial compositions at a certified point form a Cauchy sequence
        # with per-round increments below eps_{k}
        p = [ScaledComplex.from_complex(1e-2), ScaledComplex.zero()]
        prev = [v.to_complex() for v in p]
        pt = p
        for r in built_state.rounds:
            pt = r.apply_scaled(pt)
            cur = [v.to_complex() for v in pt]
            diff = max(abs(a - b) for a, b in zip(cur, prev))
            assert diff < r.eps
            prev = cur


class TestStateValidation:
    def test_requires_vertical_initial(self):
        K = ShellUnion.from_linear([(2, 4, 10)], (1,), 0)
        with pytest.raises(ValueError, match="vertical"):
            PushOutState(dim=2, initial=K)

    def test_requires_dilated_schedule(self):
        K = ShellUnion.from_linear([(0.5, 0.9, 10)], (0,), 1)
        with pytest.raises(ValueError, match="a_1 > 1"):
            PushOutState(dim=2, initial=K)

    def test_dim3_round_builds(self):
        state = build_pushout(desk_schedule(3, 3), dim=3, k_max=2)
        assert state.k == 2
        for r in state.rounds:
            assert r.phi.dim == 3 and r.psi.dim == 3


class TestSerialization:
    def test_round_trip_identical(self, built_state, tmp_path):
        doc = state_to_dict(built_state)
        text = json.dumps(doc)
        restored = state_from_dict(json.loads(text))
        assert state_to_dict(restored) == doc
        # functional equality on a sample orbit
        rec_a = compose_orbit(built_state, [2.0 + 0j, 0j])
        rec_b = compose_orbit(restored, [2.0 + 0j, 0j])
        assert rec_a.log_maxnorms == rec_b.log_maxnorms

    def test_version_checked(self, built_state):
        doc = state_to_dict(built_state)
        doc["version"] = 99
        with pytest.raises(ValueError, match="version"):
            state_from_dict(doc)

    def test_witnesses_survive(self, built_state):
        doc = state_to_dict(built_state)
        restored = state_from_dict(doc)
        for ra, rb in zip(built_state.rounds, restored.rounds):
            assert ra.phi_witnesses == rb.phi_witnesses
            assert ra.psi_witnesses == rb.psi_witnesses


class TestBuildRoundIncremental:
    def test_round_indices_and_eps(self):
        state = PushOutState(dim=2, initial=desk_schedule(2, 3))
        r1 = build_shear_round(state)
        r2 = build_shear_round(state)
        assert (r1.index, r2.index) == (1, 2)
        assert r1.eps == 0.25 and r2.eps == 0.125
        assert r2.shells_before is r1.shells_after
