"""Command line front end.

Exit codes: 0 success; 2 when a sample admits no maximum likelihood fit
(all failures in one group); 3 when a posterior fails its propriety check;
4 for malformed or inconsistent input files; 1 for anything else that goes
wrong.  Numeric output is printed as ``key value`` lines with six
significant digits so runs are easy to diff and to parse.

Sample file format::

    # comment lines and blank lines are ignored
    m n k
    R: r1 r2 ... rk
    t1 delta1 s1
    ...
    tk deltak sk
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .bayes import (
    PriorSpec,
    ShapeHyper,
    bayes_estimate,
    draw_posterior,
    draw_posterior_two_complete,
    hpd_interval,
    posterior_predictive_pvalue,
    weibull_posterior_complete,
)
from .errors import (
    ConvergenceError,
    DegenerateWeightsError,
    ImproperPosteriorError,
    NoMleError,
    NonIntegrableTargetError,
    SampleFileError,
    SingularInformationError,
    UnstableBootstrapError,
)
from .gof import (
    CompleteSample,
    _ks_rowwise,
    fit_common_shape,
    fit_weibull_complete,
    ks_distance,
    ks_pvalue,
    lr_test_common_shape,
)
from .jpc import (
    CensoringScheme,
    JointParams,
    JpcObservation,
    JpcSample,
    break_ties,
    shift_sample,
    simulate_jpc,
)
from .mle import asymptotic_ci, bootstrap_ci, fit_mle, fit_mle_ordered
from .rng import BetaGammaHyper, RngStream
from .study import StudyConfig, run_interval_study, run_point_study

SEED_ENV_VAR = "JOINTWEIBULL_SEED"

EXIT_NO_MLE = 2
EXIT_IMPROPER = 3
EXIT_PARSE = 4


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# --------------------------------------------------------------------------
# sample files


def parse_jpc_lines(lines: Sequence[str]) -> JpcSample:
    content: list[tuple[int, str]] = []
    for i, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        content.append((i, stripped))
    if not content:
        raise SampleFileError("file holds no data lines")
    lineno, header = content[0]
    parts = header.split()
    if len(parts) != 3:
        raise SampleFileError(f"line {lineno}: header must read 'm n k'")
    try:
        m, n, k = (int(p) for p in parts)
    except ValueError as exc:
        raise SampleFileError(f"line {lineno}: header must hold three integers") from exc
    if len(content) < 2:
        raise SampleFileError("missing withdrawal line 'R: ...'")
    lineno, rline = content[1]
    if not rline.startswith("R:"):
        raise SampleFileError(f"line {lineno}: expected a line starting with 'R:'")
    try:
        r = tuple(int(p) for p in rline[2:].split())
    except ValueError as exc:
        raise SampleFileError(f"line {lineno}: withdrawal counts must be integers") from exc
    body = content[2:]
    if len(body) != k:
        raise SampleFileError(
            f"expected {k} observation lines, found {len(body)}"
        )
    times, deltas, splits = [], [], []
    for lineno, line in body:
        parts = line.split()
        if len(parts) != 3:
            raise SampleFileError(f"line {lineno}: expected 't delta s'")
        try:
            times.append(float(parts[0]))
            deltas.append(int(parts[1]))
            splits.append(int(parts[2]))
        except ValueError as exc:
            raise SampleFileError(f"line {lineno}: malformed observation") from exc
    times = break_ties(times)
    try:
        scheme = CensoringScheme(m=m, n=n, k=k, R=r)
        obs = tuple(
            JpcObservation(t=float(t), delta=d, s=s)
            for t, d, s in zip(times, deltas, splits)
        )
        return JpcSample(scheme=scheme, obs=obs)
    except ValueError as exc:
        raise SampleFileError(f"inconsistent sample: {exc}") from exc


def parse_jpc_file(path: str) -> JpcSample:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_jpc_lines(fh.readlines())
    except OSError as exc:
        raise SampleFileError(f"cannot read {path}: {exc}") from exc


def serialize_jpc_sample(sample: JpcSample) -> str:
    sch = sample.scheme
    lines = [f"{sch.m} {sch.n} {sch.k}", "R: " + " ".join(str(r) for r in sch.R)]
    for o in sample.obs:
        lines.append(f"{o.t:.12g} {o.delta} {o.s}")
    return "\n".join(lines) + "\n"


def parse_complete_file(path: str) -> tuple[float, ...]:
    values = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for i, raw in enumerate(fh, start=1):
                stripped = raw.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                for tok in stripped.replace(",", " ").split():
                    try:
                        values.append(float(tok))
                    except ValueError as exc:
                        raise SampleFileError(f"line {i}: not a number: {tok!r}") from exc
    except OSError as exc:
        raise SampleFileError(f"cannot read {path}: {exc}") from exc
    if not values:
        raise SampleFileError(f"{path} holds no values")
    return tuple(values)


# --------------------------------------------------------------------------
# subcommands


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise SampleFileError(f"{SEED_ENV_VAR} must be an integer") from exc
    return 0


def _emit(out, key: str, *values) -> None:
    rendered = " ".join(_fmt(v) if isinstance(v, float) else str(v) for v in values)
    print(f"{key} {rendered}", file=out)


def _load_jpc(args) -> JpcSample:
    sample = parse_jpc_file(args.sample)
    if args.shift:
        sample = shift_sample(sample, args.shift)
    return sample


def _cmd_simulate(args) -> int:
    scheme = CensoringScheme(m=args.m, n=args.n, k=args.k, R=tuple(args.R))
    params = JointParams(alpha=args.alpha, lambda1=args.lambda1, lambda2=args.lambda2)
    sample = simulate_jpc(scheme, params, RngStream(_seed(args)))
    text = serialize_jpc_sample(sample)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def _cmd_fit(args) -> int:
    sample = _load_jpc(args)
    fit = fit_mle_ordered(sample) if args.ordered else fit_mle(sample)
    out = sys.stdout
    _emit(out, "alpha", fit.params.alpha)
    _emit(out, "lambda1", fit.params.lambda1)
    _emit(out, "lambda2", fit.params.lambda2)
    _emit(out, "loglik", fit.loglik)
    _emit(out, "iterations", fit.iterations)
    _emit(out, "converged", int(fit.converged))
    if args.ordered:
        _emit(out, "boundary", int(fit.boundary))
    try:
        cis = asymptotic_ci(sample, fit, args.level)
        for name, ci in zip(("alpha", "lambda1", "lambda2"), cis):
            _emit(out, f"ci_{name}", ci.lower, ci.upper)
        _emit(out, "ci_level", args.level)
    except SingularInformationError as exc:
        print(f"warning: no asymptotic intervals: {exc}", file=sys.stderr)
    return 0


def _cmd_bootstrap(args) -> int:
    sample = _load_jpc(args)
    res = bootstrap_ci(
        sample,
        level=args.level,
        n_boot=args.n_boot,
        ordered=args.ordered,
        rng=RngStream(_seed(args)),
    )
    out = sys.stdout
    for name, ci in zip(("alpha", "lambda1", "lambda2"), res[:3]):
        _emit(out, f"ci_{name}", ci.lower, ci.upper)
    _emit(out, "ci_level", args.level)
    _emit(out, "skipped", res.skipped)
    return 0


def _prior_from_args(args) -> PriorSpec:
    return PriorSpec(
        bg=BetaGammaHyper(args.a0, args.b0, args.a1, args.a2),
        shape=ShapeHyper(args.a, args.b),
        ordered=args.ordered,
    )


def _cmd_bayes(args) -> int:
    sample = _load_jpc(args)
    prior = _prior_from_args(args)
    post = draw_posterior(sample, prior, args.n_draws, RngStream(_seed(args)))
    out = sys.stdout
    names = ("alpha", "lambda1", "lambda2")
    extractors = (
        lambda a, l1, l2: a,
        lambda a, l1, l2: l1,
        lambda a, l1, l2: l2,
    )
    for name, h in zip(names, extractors):
        _emit(out, name, bayes_estimate(post, h))
    for name, h in zip(names, extractors):
        ci = hpd_interval(post, h, args.level)
        _emit(out, f"hpd_{name}", ci.lower, ci.upper)
    _emit(out, "hpd_level", args.level)
    _emit(out, "ess", post.ess)
    if post.low_ess:
        print("warning: effective sample size below 1% of draws", file=sys.stderr)
    return 0


def _cmd_analyze(args) -> int:
    out = sys.stdout
    seed = _seed(args)
    data = []
    for path in (args.data1, args.data2):
        data.append(CompleteSample.from_raw(parse_complete_file(path), shift=args.shift))
    shape_prior = ShapeHyper(args.a, args.b)
    for tag, ds, offset in (("data1", data[0], 10), ("data2", data[1], 20)):
        fit = fit_weibull_complete(ds)
        d = ks_distance(ds, fit.alpha, fit.lam)
        _emit(out, f"{tag}_alpha", fit.alpha)
        _emit(out, f"{tag}_lambda", fit.lam)
        _emit(out, f"{tag}_ks", d)
        _emit(out, f"{tag}_ks_pvalue", ks_pvalue(d, ds.n))
        stream = RngStream(seed, offset)
        alphas, lams = weibull_posterior_complete(
            ds, args.a0, args.b0, shape_prior, args.n_draws, stream
        )
        _emit(out, f"{tag}_bayes_alpha", float(alphas.mean()))
        _emit(out, f"{tag}_bayes_lambda", float(lams.mean()))
        p_b, exp_ks = posterior_predictive_pvalue(
            ds,
            PriorSpec(
                bg=BetaGammaHyper(args.a0, args.b0, 1.0, 1.0), shape=shape_prior
            ),
            n_rep=args.n_rep,
            rng=RngStream(seed, offset + 1),
        )
        _emit(out, f"{tag}_bayes_expected_ks", exp_ks)
        _emit(out, f"{tag}_bayes_predictive_p", p_b)
    common = fit_common_shape(data[0], data[1])
    _emit(out, "common_alpha", common.alpha)
    _emit(out, "common_lambda1", common.lam1)
    _emit(out, "common_lambda2", common.lam2)
    stat, p = lr_test_common_shape(data[0], data[1])
    _emit(out, "lr_stat", stat)
    _emit(out, "lr_pvalue", p)
    for tag, ds, lam in (("data1", data[0], common.lam1), ("data2", data[1], common.lam2)):
        d = ks_distance(ds, common.alpha, lam)
        _emit(out, f"common_{tag}_ks", d)
        _emit(out, f"common_{tag}_ks_pvalue", ks_pvalue(d, ds.n))
    prior = PriorSpec(
        bg=BetaGammaHyper(args.a0, args.b0, args.a1, args.a2), shape=shape_prior
    )
    post = draw_posterior_two_complete(
        data[0], data[1], prior, args.n_draws, RngStream(seed, 30)
    )
    if post.low_ess:
        print(
            "warning: common-shape importance weights are degenerate "
            f"(effective sample size {post.ess:.1f} of {post.n_draws}); "
            "common_bayes_* values are unreliable",
            file=sys.stderr,
        )
    _emit(out, "common_bayes_alpha", bayes_estimate(post, lambda a, l1, l2: a))
    _emit(out, "common_bayes_lambda1", bayes_estimate(post, lambda a, l1, l2: l1))
    _emit(out, "common_bayes_lambda2", bayes_estimate(post, lambda a, l1, l2: l2))
    pred_stream = RngStream(seed, 31)
    for tag, ds, lam_draws in (
        ("data1", data[0], post.lambda1),
        ("data2", data[1], post.lambda2),
    ):
        f_obs = -np.expm1(-lam_draws[:, None] * ds.sorted ** post.alpha[:, None])
        d_obs = _ks_rowwise(f_obs)
        _emit(out, f"common_bayes_{tag}_expected_ks", float((post.normalized * d_obs).sum()))
        p_b = _predictive_p_from_draws(
            ds, post.alpha, lam_draws, post.normalized, d_obs, pred_stream
        )
        _emit(out, f"common_bayes_{tag}_predictive_p", p_b)
    return 0


def _predictive_p_from_draws(ds, alphas, lams, norm, d_obs, rng: RngStream) -> float:
    n_rep = alphas.size
    c = np.cumsum(norm)
    c[-1] = 1.0
    idx = np.searchsorted(c, rng.uniform(n_rep), side="left")
    u = rng.uniform((n_rep, ds.n))
    reps = np.sort((-np.log1p(-u) / lams[idx, None]) ** (1.0 / alphas[idx, None]), axis=1)
    f_rep = -np.expm1(-lams[idx, None] * reps ** alphas[idx, None])
    d_rep = _ks_rowwise(f_rep)
    return float(np.mean(d_rep >= d_obs[idx]))


def _study_config_from_json(path: str) -> tuple[StudyConfig, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SampleFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SampleFileError(f"{path}: invalid JSON: {exc}") from exc
    try:
        scheme = CensoringScheme(
            m=raw["m"], n=raw["n"], k=raw["k"], R=tuple(raw["R"])
        )
        truth = JointParams(
            alpha=raw["alpha"], lambda1=raw["lambda1"], lambda2=raw["lambda2"]
        )
        informative = None
        if "informative" in raw:
            ip = raw["informative"]
            informative = PriorSpec(
                bg=BetaGammaHyper(ip["a0"], ip["b0"], ip["a1"], ip["a2"]),
                shape=ShapeHyper(ip["a"], ip["b"]),
            )
        config = StudyConfig(
            scheme=scheme,
            truth=truth,
            replications=raw["replications"],
            methods=tuple(raw["methods"]),
            level=raw.get("level", 0.9),
            n_posterior=raw.get("n_posterior", 1000),
            n_boot=raw.get("n_boot", 500),
            base_seed=raw.get("base_seed", 0),
            shape_rate_flat=raw.get("shape_rate_flat", 0.0),
            informative=informative,
        )
        kind = raw.get("kind", "point")
    except KeyError as exc:
        raise SampleFileError(f"{path}: missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise SampleFileError(f"{path}: bad configuration: {exc}") from exc
    if kind not in ("point", "interval"):
        raise SampleFileError(f"{path}: kind must be 'point' or 'interval'")
    return config, kind


def _cmd_study(args) -> int:
    config, kind = _study_config_from_json(args.config)
    if args.base_seed is not None:
        config = StudyConfig(
            scheme=config.scheme,
            truth=config.truth,
            replications=config.replications,
            methods=config.methods,
            level=config.level,
            n_posterior=config.n_posterior,
            n_boot=config.n_boot,
            base_seed=args.base_seed,
            shape_rate_flat=config.shape_rate_flat,
            informative=config.informative,
        )
    report = run_point_study(config) if kind == "point" else run_interval_study(config)
    if args.out == "-":
        report.to_csv(sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            report.to_csv(fh)
    return 0


# --------------------------------------------------------------------------
# wiring


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would collide with the
    # no-MLE code; route usage problems to 1 instead
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_prior_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--a0", type=float, default=0.0, help="beta-gamma total-rate shape")
    p.add_argument("--b0", type=float, default=0.0, help="beta-gamma total-rate rate")
    p.add_argument("--a1", type=float, default=0.0, help="beta-gamma split weight 1")
    p.add_argument("--a2", type=float, default=0.0, help="beta-gamma split weight 2")
    p.add_argument("--a", type=float, default=0.0, help="shape prior: gamma shape")
    p.add_argument("--b", type=float, default=0.0, help="shape prior: gamma rate")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jointweibull", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one censoring outcome")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--R", type=int, nargs="+", required=True, metavar="r")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--lambda1", type=float, required=True)
    p.add_argument("--lambda2", type=float, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="maximum likelihood fit of a sample file")
    p.add_argument("sample")
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--ordered", action="store_true")
    p.add_argument("--level", type=float, default=0.9)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("bootstrap", help="parametric bootstrap percentile intervals")
    p.add_argument("sample")
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--ordered", action="store_true")
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--n-boot", type=int, default=500)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_bootstrap)

    p = sub.add_parser("bayes", help="posterior means and HPD intervals")
    p.add_argument("sample")
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--ordered", action="store_true")
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--n-draws", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None)
    _add_prior_flags(p)
    p.set_defaults(func=_cmd_bayes)

    p = sub.add_parser(
        "analyze", help="full classical + posterior analysis of two complete samples"
    )
    p.add_argument("data1")
    p.add_argument("data2")
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--n-draws", type=int, default=2000)
    p.add_argument("--n-rep", type=int, default=2000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ordered", action="store_true", help=argparse.SUPPRESS)
    _add_prior_flags(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("study", help="run a Monte Carlo study from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", default="-")
    p.add_argument("--base-seed", type=int, default=None, dest="base_seed")
    p.set_defaults(func=_cmd_study)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoMleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_MLE
    except (ImproperPosteriorError, DegenerateWeightsError, NonIntegrableTargetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IMPROPER
    except SampleFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConvergenceError, UnstableBootstrapError, SingularInformationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
