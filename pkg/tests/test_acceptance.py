"""Acceptance battery: sixteen go/no-go checks, one per criterion.

Each test drives the same runner the command-line ``verify``/``table``
commands use (single battery implementation), prints one PASS/FAIL line
with the decisive metric, and asserts the runner's verdict.  Runners
carry their own tolerances and time budgets; nothing is re-derived
here, so the CLI artifacts and this suite can never disagree.

Oracle policy: every expected value inside the runners is either a
closed form evaluated by an independent route (modified Bessel,
Gamma products, determinant ratios), an exact rational identity, or a
Monte Carlo band of 3 standard errors plus documented discretization
allowances; p-value gates use the pinned seeds recorded in the runners.
"""

from whittaker_lab import cli


def _drive(name, extra=()):
    check = cli.CRITERIA[name]({})
    verdict = "PASS" if check.passed else "FAIL"
    detail = "  ".join(f"{k}={check.info[k]}" for k in extra
                       if k in check.info)
    print(f"{check.name} {verdict} — metric {check.metric:.6g} "
          f"(tolerance {check.tolerance:.6g}) {detail}")
    assert check.passed, check.info
    return check


def test_criterion_01_rank2_closed_form_three_routes():
    _drive("criterion-01", ("elapsed_s", "samples"))


def test_criterion_02_rank3_route_agreement():
    _drive("criterion-02", ("elapsed_s",))


def test_criterion_03_eigenfunction_residual():
    _drive("criterion-03", ("residual_rank2", "residual_rank3",
                            "stencil_decay_slope"))


def test_criterion_04_deep_chamber_domination():
    _drive("criterion-04", ("bound_ok",))


def test_criterion_05_zero_temperature_degeneration():
    _drive("criterion-05", ("relative_errors",))


def test_criterion_06_chamber_exit_probability():
    _drive("criterion-06", ("paths",))


def test_criterion_07_polytope_pushforward_and_constant_verdict():
    check = _drive("criterion-07", ())
    print(f"    constant verdict: {check.info['constant_verdict']}")
    print(f"    volume={check.info['volume']} "
          f"adopted={check.info['adopted_constant']} "
          f"inverted={check.info['inverted_constant']}")


def test_criterion_08_gauss_factorization_on_brownian_paths():
    _drive("criterion-08", ("exact_identities", "dt"))


def test_criterion_09_braid_invariance_first_order():
    _drive("criterion-09", ("mean_ratio",))


def test_criterion_10_fixed_time_law():
    _drive("criterion-10", ("zero_drift_p", "drifted_p", "elapsed_s"))


def test_criterion_11_laplace_transform_routes():
    _drive("criterion-11", ())


def test_criterion_12_free_energy_trend():
    _drive("criterion-12", ("constant", "monotone",
                            "approach_from_below"))


def test_criterion_13_exponential_functional_drift():
    _drive("criterion-13", ("bins_ok", "bins_used",
                            "gig_normalization_rel_err"))


def test_criterion_14_positive_coordinate_stationarity():
    _drive("criterion-14", ("replicas",))


def test_criterion_15_q_exact_identities():
    check = _drive("criterion-15", ("exact_all_zero",
                                    "float_intertwining", "elapsed_s"))
    print(f"    adjudication: {check.info['adjudication']}")


def test_criterion_16_stationary_output_increments():
    _drive("criterion-16", ())
