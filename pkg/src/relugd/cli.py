"""Command-line interface.

Subcommands: ``gen-data``, ``train``, ``certify``, ``verify-convergence`` and
``probe-lemmas``. Every output is a deterministic function of the flags, the
config file and the input files. Exit codes: 0 success, 2 usage or
validation error, 3 divergence, 4 probe failure.
"""
import argparse
import json
import math
import os
import sys

import numpy as np

from relugd import certificates, gram, probes, serialization, training
from relugd.datasets import generate_dataset
from relugd.errors import DivergenceError, RelugdError, SchemaError
from relugd.network import dataset_from_dict, dataset_to_dict, network_to_dict

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3
EXIT_PROBE_FAILURE = 4

CONFIG_DEFAULTS = {
    "data": {"generate": {"d": 2, "m": 4, "seed": 0, "norm_range": [1.0, 1.0]}},
    "width": 256,
    "eta": "eta_max_cor",
    "steps": 100,
    "eps": 0.2,
    "trials": 1,
    "seed": 0,
    "gram_method": "closed",
    "mc_samples": 1000000,
    "record_gram_every": 0,
    "envelope": "capital-lambda",
}
ETA_KEYWORDS = ("eta_max_cor", "eta_max_thm")


class UsageError(RelugdError):
    pass


def _load_config(path):
    cfg = json.loads(json.dumps(CONFIG_DEFAULTS))
    if path is None:
        return cfg
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    serialization.check_schema(doc, "config")
    unknown = set(doc) - set(CONFIG_DEFAULTS) - {"schema"}
    if unknown:
        raise SchemaError(f"unknown config keys: {sorted(unknown)}")
    cfg.update({k: v for k, v in doc.items() if k != "schema"})
    return cfg


def _apply_flags(cfg, args):
    for flag, key in (("seed", "seed"), ("gram", "gram_method"), ("mc_samples", "mc_samples"),
                      ("envelope", "envelope"), ("eps", "eps"), ("width", "width"),
                      ("steps", "steps"), ("trials", "trials"), ("eta", "eta")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "data", None) is not None:
        cfg["data"] = {"path": args.data}
    if not 0 <= int(cfg["seed"]) < 2**64:
        raise UsageError(f"seed must be an unsigned 64-bit integer, got {cfg['seed']}")
    if not 0.0 < float(cfg["eps"]) < 1.0:
        raise UsageError(f"eps must lie in (0, 1), got {cfg['eps']}")
    if int(cfg["trials"]) < 1:
        raise UsageError("trials must be at least 1")
    if cfg["gram_method"] not in ("closed", "mc"):
        raise UsageError(f"gram_method must be 'closed' or 'mc', got {cfg['gram_method']!r}")
    if cfg["envelope"] not in ("capital-lambda", "sum-over-m"):
        raise UsageError(f"unknown envelope {cfg['envelope']!r}")
    return cfg


def _dataset(cfg):
    src = cfg["data"]
    if "path" in src:
        with open(src["path"], encoding="utf-8") as fh:
            return dataset_from_dict(json.load(fh))
    gen = src["generate"]
    return generate_dataset(int(gen["d"]), int(gen["m"]), int(gen["seed"]),
                            tuple(gen.get("norm_range", (1.0, 1.0))))


def _validated(data):
    report = gram.check_pairwise_independence(data)
    if not report.valid:
        raise UsageError(f"inputs are not pairwise linearly independent: zero vectors "
                         f"{list(report.zero_vectors)}, dependent pairs {list(report.dependent_pairs)}")
    return data


def _det_gram(data, cfg):
    if cfg["gram_method"] == "mc":
        return gram.deterministic_gram_monte_carlo(data, int(cfg["mc_samples"]), int(cfg["seed"]))
    return gram.deterministic_gram_closed_form(data)


def _provenance(cfg):
    mc = cfg["gram_method"] == "mc"
    return dict(gram_method="monte_carlo" if mc else "closed_form",
                mc_samples=int(cfg["mc_samples"]) if mc else 0, seed=int(cfg["seed"]))


def _eta(cfg, cert):
    eta = cfg["eta"]
    if isinstance(eta, str):
        if eta not in ETA_KEYWORDS:
            raise UsageError(f"eta must be a number or one of {ETA_KEYWORDS}, got {eta!r}")
        return float(getattr(cert, eta))
    eta = float(eta)
    if not (math.isfinite(eta) and eta >= 0.0):
        raise UsageError(f"eta must be finite and nonnegative, got {eta}")
    return eta


def _rate(cert, which):
    if which == "capital-lambda":
        return cert.capital_lambda
    return (cert.lam + cert.mu) / cert.m


def _envelope(risk, eta, rate):
    q = eta * rate
    if not 0.0 < q < 1.0:
        return None
    return certificates.rate_envelope(float(risk[0]), eta, rate, np.arange(len(risk)))


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _setup(args):
    cfg = _apply_flags(_load_config(args.config), args)
    data = _validated(_dataset(cfg))
    dg = _det_gram(data, cfg)
    cert = certificates.certify(data, dg, float(cfg["eps"]))
    return cfg, data, dg, cert


def cmd_gen_data(args):
    cfg = _load_config(args.config)
    gen = dict(cfg["data"].get("generate", CONFIG_DEFAULTS["data"]["generate"]))
    for key in ("d", "m"):
        if getattr(args, key) is not None:
            gen[key] = getattr(args, key)
    if args.seed is not None:
        gen["seed"] = args.seed
    if args.norm_range is not None:
        gen["norm_range"] = args.norm_range
    data = generate_dataset(int(gen["d"]), int(gen["m"]), int(gen["seed"]),
                            tuple(gen.get("norm_range", (1.0, 1.0))))
    path = _out_path(args, "dataset.json")
    serialization.dump(dataset_to_dict(_validated(data)), path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_train(args):
    cfg, data, dg, cert = _setup(args)
    eta = _eta(cfg, cert)
    width = int(cfg["width"])
    config = training.TrainConfig(eta=eta, steps=int(cfg["steps"]), seed=int(cfg["seed"]),
                                  width=width, record_gram_every=int(cfg["record_gram_every"]))
    net0 = training.initialize(data.input_dim, width, config.seed)
    traj = training.train(net0, data, config)
    env = _envelope(traj.risk, eta, _rate(cert, cfg["envelope"]))
    csv_path = _out_path(args, "trajectory.csv")
    training.write_trajectory_csv(traj, csv_path, envelope=env)
    net_path = _out_path(args, "final_net.json")
    serialization.dump(network_to_dict(traj.final), net_path)
    print(f"wrote {csv_path} and {net_path}; final risk {float(traj.risk[-1])!r}")
    return EXIT_OK


def cmd_certify(args):
    cfg, data, dg, cert = _setup(args)
    path = _out_path(args, "certificate.json")
    doc = certificates.certificate_to_dict(cert, **_provenance(cfg))
    serialization.dump(doc, path)
    gpath = _out_path(args, "gram.json")
    serialization.dump(gram.gram_to_dict(dg), gpath)
    flagged = list(cert.nonfinite_fields) + list(cert.zero_fields)
    note = f"; flagged thresholds: {flagged}" if flagged else ""
    print(f"wrote {path} and {gpath}; lambda={cert.lam!r} mu={cert.mu!r}{note}")
    return EXIT_OK


def _gram_lower_bound(traj, cert):
    # smallest Gram eigenvalues vs half their deterministic values, at steps within the drift radius
    checked = 0
    ok = True
    for n, lg, lh in zip(traj.gram_steps, traj.lambda_G, traj.lambda_H):
        if traj.max_drift_combined[n] <= cert.radius_R:
            checked += 1
            ok = ok and lg >= cert.lam / 2.0 - 1e-9 and lh >= cert.mu / 2.0 - 1e-9
    return checked, ok


def verify_convergence(data, cert, eta, width, steps, trials, seed, record_gram_every=0):
    """Train ``trials`` independently initialized networks and check both envelopes.

    A trial that diverges counts as violating both envelopes.
    """
    rates = {"capital_lambda": cert.capital_lambda, "sum_over_m": (cert.lam + cert.mu) / cert.m}
    runs = []
    config = training.TrainConfig(eta=eta, steps=steps, seed=seed, width=width,
                                  record_gram_every=record_gram_every)
    for t in range(trials):
        net0 = training.initialize(data.input_dim, width, seed, trial=t)
        run = {"trial": t}
        try:
            traj = training.train(net0, data, config)
        except DivergenceError as exc:
            run.update(diverged_at=exc.step, nonincreasing=False, final_risk=None,
                       **{f"holds_{k}": False for k in rates},
                       gram_steps_checked=0, gram_lower_bound_holds=None)
            runs.append(run)
            continue
        for key, rate in rates.items():
            env = _envelope(traj.risk, eta, rate)
            run[f"holds_{key}"] = None if env is None else bool(np.all(traj.risk <= env))
        checked, ok = _gram_lower_bound(traj, cert)
        run.update(diverged_at=None,
                   nonincreasing=bool(np.all(np.diff(traj.risk) <= 0.0)),
                   initial_risk=float(traj.risk[0]), final_risk=float(traj.risk[-1]),
                   gram_steps_checked=checked, gram_lower_bound_holds=ok if checked else None)
        runs.append(run)

    def fraction(key):
        return sum(1 for r in runs if r[key]) / trials

    return {
        "schema": serialization.schema_tag("verification"),
        "eta": eta,
        "width": width,
        "steps": steps,
        "trials": trials,
        "seed": seed,
        "eps": cert.eps,
        "target": 1.0 - cert.eps,
        "capital_lambda": cert.capital_lambda,
        "sum_over_m": rates["sum_over_m"],
        "lambda": cert.lam,
        "mu": cert.mu,
        "radius_R": cert.radius_R,
        "fraction_capital_lambda": fraction("holds_capital_lambda"),
        "fraction_sum_over_m": fraction("holds_sum_over_m"),
        "fraction_nonincreasing": fraction("nonincreasing"),
        "runs": runs,
    }


def cmd_verify_convergence(args):
    cfg, data, dg, cert = _setup(args)
    eta = _eta(cfg, cert)
    doc = verify_convergence(data, cert, eta, int(cfg["width"]), int(cfg["steps"]),
                             int(cfg["trials"]), int(cfg["seed"]),
                             int(cfg["record_gram_every"]))
    doc["provenance"] = _provenance(cfg)
    path = _out_path(args, "verification.json")
    serialization.dump(doc, path)
    print(f"wrote {path}; envelope held in {doc['fraction_capital_lambda']!r} "
          f"(capital-lambda) and {doc['fraction_sum_over_m']!r} (sum-over-m) of runs")
    return EXIT_OK


def cmd_probe_lemmas(args):
    seed = 0 if args.seed is None else args.seed
    results = probes.run_suite(seed, args.scale)
    doc = probes.report_to_dict(results, seed, args.scale)
    path = _out_path(args, "probes.json")
    serialization.dump(doc, path)
    failed = [r.name for r in results if not (r.passed or r.vacuous)]
    print(f"wrote {path}; {len(results) - len(failed)}/{len(results)} probes passed")
    return EXIT_PROBE_FAILURE if failed else EXIT_OK


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _eta_arg(text):
    return text if text in ETA_KEYWORDS else float(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="relugd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
        p.add_argument("--out", default=".", help="output directory")

    def experiment(p):
        common(p)
        p.add_argument("--data", help="dataset JSON (overrides the config's data source)")
        p.add_argument("--gram", choices=("closed", "mc"), help="deterministic Gram method")
        p.add_argument("--mc-samples", type=int, dest="mc_samples")
        p.add_argument("--eps", type=float, help="failure probability in (0, 1)")
        p.add_argument("--width", type=int)

    p = sub.add_parser("gen-data", help="generate a dataset JSON")
    common(p)
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--norm-range", type=float, nargs=2, dest="norm_range", metavar=("LO", "HI"))
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train and write the trajectory CSV and final network")
    experiment(p)
    p.add_argument("--eta", type=_eta_arg)
    p.add_argument("--steps", type=int)
    p.add_argument("--envelope", choices=("capital-lambda", "sum-over-m"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("certify", help="write the rate certificate and Gram matrices")
    experiment(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify-convergence", help="check the envelope over seeded trials")
    experiment(p)
    p.add_argument("--eta", type=_eta_arg)
    p.add_argument("--steps", type=int)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_verify_convergence)

    p = sub.add_parser("probe-lemmas", help="run the Monte Carlo probe suite")
    common(p)
    p.add_argument("--scale", choices=("quick", "full"), default="quick")
    p.set_defaults(func=cmd_probe_lemmas)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (RelugdError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
