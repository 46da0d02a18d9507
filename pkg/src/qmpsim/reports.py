"""Exact-evaluation reports behind the ``wv``, ``nwv``, ``pointer`` and ``sweep`` commands.

Every numeric entry is a record ``{"name", "value", "eq"}`` where ``eq`` names
the relation the number realizes, so that acceptance scripts can look values
up by meaning rather than by position:

=======================  ====================================================
eq tag                   relation
=======================  ====================================================
expectation              <i|A|i>
weak-value               <f|A|i>/<f|i>
null-weak-value          <i|A|i>/|<f|i>|^2
weak-decomposition       <A> = sum_n |<f_n|i>|^2 x weak value
strong-decomposition     <A> = sum_n (sum_j |<f_n|Pi_j|i>|^2) x convex mean
detector-calibration     (P(click) - |delta|^2)/(|delta~|^2 - |delta|^2)
conditional-calibration  same, conditioned on postselection
partial-collapse         click probability p0|alpha|^2 + p1|beta|^2
bayes-null               P(first click | retained)
null-ratio               P(first click | retained)/p = <A>/P(retained)
naive-ancilla            qubit-sector postselection numerator (always 0)
ancilla-decomposition    U / U-tilde decomposition in {|0>,|1>,|R>}
pointer-mean             unconditioned pointer moments
pointer-shift            postselected pointer moments in q
pointer-momentum         postselected pointer mean momentum
=======================  ====================================================
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from . import detector, nullprotocol, pointer, weakvalues
from .dsl import DetectorStage, PointerStage, ProtocolSpec, serialize
from .errors import DivergentValueError, QmpError
from .hilbert import complement, expectation, number_operator
from .nullprotocol import PartialCollapseSpec

IDENTITY_TOL = 1e-12


def _val(name: str, value, eq: str) -> dict:
    if value is not None:
        value = float(value)
    return {"name": name, "value": value, "eq": eq}


def _complex(name: str, z: complex | None, eq: str) -> list[dict]:
    if z is None:
        return [_val(f"{name}.re", None, eq), _val(f"{name}.im", None, eq)]
    return [_val(f"{name}.re", z.real, eq), _val(f"{name}.im", z.imag, eq)]


def _check(name: str, passed: bool, detail: str = "") -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def _header(command: str, spec: ProtocolSpec) -> dict:
    return {"command": command, "protocol": serialize(spec), "protocol_hash": spec.protocol_hash()}


def _weak_value_or_none(i, f, A):
    try:
        return weakvalues.weak_value(i, f, A)
    except DivergentValueError:
        return None


def _decomposition_records(prefix: str, terms, labels: Iterable[str], eq: str) -> list[dict]:
    out = []
    for label, t in zip(labels, terms):
        out.append(_val(f"{prefix}.{label}.weight", t.weight, eq))
        out += _complex(f"{prefix}.{label}.conditional_value", t.conditional_value, eq)
    out += _complex(f"{prefix}.weighted_sum", weakvalues.weighted_sum(terms), eq)
    return out


def wv_report(spec: ProtocolSpec) -> dict:
    i, f, A = spec.preselect_ket(), spec.postselect_ket(), number_operator()
    d = spec.measurement.params()
    basis = [f, complement(f)]
    mean = expectation(A, i)
    wv = _weak_value_or_none(i, f, A)
    weak_terms = weakvalues.wv_decomposition(i, basis, A)
    strong_terms = weakvalues.strong_decomposition(i, basis, A)
    values = [
        _val("expectation", mean, "expectation"),
        *_complex("weak_value", wv, "weak-value"),
        _val("detector.click_gap", d.click_gap, "detector-calibration"),
        _val("click_probability", detector.click_probability(i, d), "detector-calibration"),
        _val("calibrated_observable", detector.calibrated_observable(i, d), "detector-calibration"),
    ]
    checks = []
    try:
        cond = detector.conditional_calibrated(i, d, f)
        values.append(_val("conditional_click_probability", detector.conditional_click_probability(i, d, f), "conditional-calibration"))
        values.append(_val("conditional_calibrated", cond, "conditional-calibration"))
        if wv is not None:
            values.append(_val("conditional_calibrated.gap_to_re_weak_value", cond - wv.real, "conditional-calibration"))
    except QmpError as exc:
        values.append(_val("conditional_calibrated", None, "conditional-calibration"))
        checks.append(_check("conditional_calibrated_defined", False, str(exc)))
    values += _decomposition_records("weak_decomposition", weak_terms, ("f", "fbar"), "weak-decomposition")
    values += _decomposition_records("strong_decomposition", strong_terms, ("f", "fbar"), "strong-decomposition")
    res_w = weakvalues.decomposition_residual(weak_terms, i, A)
    res_s = weakvalues.decomposition_residual(strong_terms, i, A)
    hull = all(t.conditional_value is None or 0.0 <= t.conditional_value.real <= 1.0 for t in strong_terms)
    calib = abs(detector.calibrated_observable(i, d) - mean)
    checks += [
        _check("weak_decomposition_identity", res_w <= IDENTITY_TOL, f"residual {res_w:.3e}"),
        _check("strong_decomposition_identity", res_s <= IDENTITY_TOL, f"residual {res_s:.3e}"),
        _check("strong_values_in_spectrum", hull),
        _check("calibration_exact", calib <= IDENTITY_TOL, f"residual {calib:.3e}"),
    ]
    return {**_header("wv", spec), "values": values, "checks": checks}


def nwv_report(spec: ProtocolSpec) -> dict:
    i, f, A = spec.preselect_ket(), spec.postselect_ket(), number_operator()
    m: PartialCollapseSpec = spec.measurement
    mean = expectation(A, i)
    overlap = abs(f.inner(i)) ** 2
    values = [
        _val("expectation", mean, "expectation"),
        _val("overlap", overlap, "null-weak-value"),
        *_complex("weak_value", _weak_value_or_none(i, f, A), "weak-value"),
        _val("click_probability", nullprotocol.click_probability(i, m), "partial-collapse"),
    ]
    checks = []
    try:
        values.append(_val("null_weak_value", nullprotocol.null_weak_value(i, f, A), "null-weak-value"))
    except DivergentValueError:
        values.append(_val("null_weak_value", None, "null-weak-value"))
    try:
        bayes = nullprotocol.bayes_null_conditional(i, m, f)
        values.append(_val("bayes_null_conditional", bayes, "bayes-null"))
        values.append(_val("bayes_null_conditional_over_p", bayes / m.p1 if m.p1 else None, "null-ratio"))
    except QmpError as exc:
        bayes = None
        values.append(_val("bayes_null_conditional", None, "bayes-null"))
        checks.append(_check("bayes_defined", False, str(exc)))
    values.append(_val("retained_probability", nullprotocol.retained_probability(i, m, f), "null-ratio"))
    if m.p0 == 0.0 and m.p1 > 0.0 and bayes is not None:
        values.append(_val("click_observable", nullprotocol.click_observable(i, m), "partial-collapse"))
        ratio = nullprotocol.null_ratio_check(i, m, f)
        values += [
            _val("null_ratio.lhs", ratio.lhs, "null-ratio"),
            _val("null_ratio.rhs_exact", ratio.rhs_exact, "null-ratio"),
            _val("null_ratio.rhs_approx", ratio.rhs_approx, "null-ratio"),
            _val("null_ratio.gap", ratio.gap, "null-ratio"),
        ]
        naive = nullprotocol.naive_ancilla_numerator(i, m, f)
        dec = nullprotocol.ancilla_decomposition(i, m, f)
        values += [
            _val("naive_ancilla_numerator", naive, "naive-ancilla"),
            _val("ancilla.total", dec.total, "ancilla-decomposition"),
            _val("ancilla.middle_factor", dec.middle_factor, "ancilla-decomposition"),
            _val("ancilla.retained_probability", dec.retained_probability, "ancilla-decomposition"),
            _val("ancilla.click_probability", nullprotocol.ancilla_click_probability(i, m), "ancilla-decomposition"),
        ]
        checks += [
            _check("null_ratio_exact", ratio.exact_residual <= IDENTITY_TOL, f"residual {ratio.exact_residual:.3e}"),
            _check("naive_numerator_zero", naive == 0.0),
            _check("ancilla_total_is_expectation", abs(dec.total - mean) <= IDENTITY_TOL, f"residual {abs(dec.total - mean):.3e}"),
            _check("middle_factor_is_bayes_ratio", abs(dec.middle_factor - bayes / m.p1) <= IDENTITY_TOL,
                   f"residual {abs(dec.middle_factor - bayes / m.p1):.3e}"),
        ]
    return {**_header("nwv", spec), "values": values, "checks": checks}


def pointer_distributions(spec: ProtocolSpec):
    """Joint state plus unconditioned and postselected pointer densities."""
    st: PointerStage = spec.measurement
    i, f, A = spec.preselect_ket(), spec.postselect_ket(), number_operator()
    joint = pointer.couple(i, A, st.lam, st.pointer())
    return joint, pointer.unconditioned_distribution(joint), pointer.postselected_pointer_distribution(joint, f)


def pointer_report(spec: ProtocolSpec) -> dict:
    st: PointerStage = spec.measurement
    i, f, A = spec.preselect_ket(), spec.postselect_ket(), number_operator()
    joint, uncond, post = pointer_distributions(spec)
    wv = _weak_value_or_none(i, f, A)
    mu, vu = pointer.pointer_moments(uncond)
    mp, vp = pointer.pointer_moments(post)
    mom = pointer.momentum_mean(joint.q, pointer.postselected_wavefunction(joint, f))
    values = [
        _val("expectation", expectation(A, i), "expectation"),
        *_complex("weak_value", wv, "weak-value"),
        _val("unconditioned.mean_q", mu, "pointer-mean"),
        _val("unconditioned.var_q", vu, "pointer-mean"),
        _val("unconditioned.exact_mean_q", st.q0 + st.lam * expectation(A, i), "pointer-mean"),
        _val("postselection_probability", pointer.postselection_probability(joint, f), "pointer-shift"),
        _val("postselected.mean_q", mp, "pointer-shift"),
        _val("postselected.var_q", vp, "pointer-shift"),
        _val("postselected.weak_limit_mean_q", st.q0 + st.lam * wv.real if wv is not None else None, "pointer-shift"),
        _val("postselected.mean_p", mom, "pointer-momentum"),
    ]
    return {**_header("pointer", spec), "values": values, "checks": []}


SWEEP_PARAMS = {"eps": "wv", "p1": "nwv", "lambda": "pointer"}


def sweep_rows(spec: ProtocolSpec, param: str, values: Iterable[float]) -> list[tuple[float, float, float, float]]:
    """``(param, exact, approx, gap)`` rows; ``approx`` is the weak-limit value.

    * ``eps``: calibrated conditional detector response vs ``Re`` weak value;
    * ``p1``: ``P(first click | retained)/p`` vs the null weak value;
    * ``lambda``: postselected pointer shift over lambda vs ``Re`` weak value.
    """
    if SWEEP_PARAMS.get(param) != spec.kind:
        raise ValueError(f"--param {param} does not apply to a {spec.kind} protocol")
    i, f, A = spec.preselect_ket(), spec.postselect_ket(), number_operator()
    rows = []
    for x in values:
        x = float(x)
        if param == "eps":
            d = detector.DetectorParams.from_angle(x, spec.measurement.theta)
            exact = detector.conditional_calibrated(i, d, f)
            approx = weakvalues.weak_value(i, f, A).real
        elif param == "p1":
            if not 0 < x <= 1:
                raise ValueError("p1 must lie in (0, 1] in a sweep")
            exact = nullprotocol.bayes_null_conditional(i, PartialCollapseSpec(p1=x), f) / x
            approx = nullprotocol.null_weak_value(i, f, A)
        else:
            if x == 0:
                raise ValueError("lambda must be non-zero in a sweep")
            st = spec.measurement
            joint = pointer.couple(i, A, x, st.pointer())
            mean, _ = pointer.pointer_moments(pointer.postselected_pointer_distribution(joint, f))
            exact = (mean - st.q0) / x
            approx = weakvalues.weak_value(i, f, A).real
        rows.append((x, exact, approx, exact - approx))
    return rows


def linspace(start: float, stop: float, steps: int) -> list[float]:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if steps == 1:
        return [float(start)]
    return [float(v) for v in np.linspace(start, stop, steps)]


def report_for(command: str, spec: ProtocolSpec) -> dict:
    expected = {"wv": (DetectorStage, "wv"), "nwv": (PartialCollapseSpec, "nwv"), "pointer": (PointerStage, "pointer")}
    stage, kind = expected[command]
    if spec.kind != kind or not isinstance(spec.measurement, stage):
        raise ValueError(f"'{command}' needs a {kind} protocol, file declares {spec.kind}")
    return {"wv": wv_report, "nwv": nwv_report, "pointer": pointer_report}[command](spec)
