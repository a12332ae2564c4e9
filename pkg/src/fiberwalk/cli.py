"""Command-line driver: reproducible train / sample / test / enumerate / lift runs.

Runs are described by a flat key=value config file with dotted keys
(diff-friendly, no nesting), plus ``--seed`` and ``--out`` flags.  A
manifest with config snapshot, versions, stage timings and output
checksums is written atomically at the end of every run; rerunning
the same config and seed reproduces identical output checksums.

Exit codes: 0 success, 2 validation, 3 numeric, 4 capacity.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .agent import (
    TrainConfig,
    default_mask_k,
    default_sigma_min,
    default_schedules,
    deserialize_policy,
    make_actor_critic,
    serialize_policy,
    train,
    write_train_log,
)
from .errors import (
    ConfigError,
    FiberwalkError,
    IncompatiblePolicyError,
    ValidationError,
)
from .fibermdp import FiberEnv, MdpConfig
from .lattice import (
    compute_lattice_basis,
    decompose_initial_point,
    enumerate_fiber,
    lift_basis,
    load_basis,
    save_basis,
)
from .models import (
    all_two_way,
    beta_model,
    build_design_matrix,
    independence,
    observe_graph,
    observe_table,
    read_edge_list,
    read_table_csv,
)
from .sampling import (
    besag_clifford_pvalues,
    explore,
    mh_uniform,
    write_histogram_csv,
    write_pvalues_csv,
    write_sample_csv,
)

COMMANDS = ("train", "sample", "test", "enumerate", "lift")


class RunConfig:
    """Flat dotted-key configuration with typed accessors."""

    def __init__(self, values, seed=0, out_dir="out"):
        self.values = dict(values)
        self.seed = int(self.values.get("seed", seed))
        self.out_dir = out_dir

    @classmethod
    def from_file(cls, path, seed=0, out_dir="out"):
        values = {}
        try:
            fh = open(path)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        with fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                values[key.strip()] = value.strip()
        return cls(values, seed=seed, out_dir=out_dir)

    def get(self, key, default=None, cast=str):
        if key not in self.values or self.values[key] == "":
            return default
        raw = self.values[key]
        try:
            if cast is bool:
                return raw.lower() in ("1", "true", "yes", "on")
            return cast(raw)
        except ValueError:
            raise ConfigError(f"config key {key}={raw!r} is not a valid {cast.__name__}") from None

    def require(self, key, cast=str):
        value = self.get(key, default=None, cast=cast)
        if value is None:
            raise ConfigError(f"config key {key} is required for this command")
        return value


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class Manifest:
    def __init__(self, command, cfg):
        self.data = {
            "command": command,
            "seed": cfg.seed,
            "config": dict(cfg.values),
            "versions": {
                "fiberwalk": __version__,
                "numpy": np.__version__,
                "python": ".".join(str(v) for v in sys.version_info[:3]),
            },
            "timings": {},
            "outputs": {},
        }
        self._stage_start = None
        self._stage_name = None

    def start(self, stage):
        self._stage_name = stage
        self._stage_start = time.perf_counter()

    def finish(self):
        self.data["timings"][self._stage_name] = time.perf_counter() - self._stage_start

    def record_output(self, path):
        self.data["outputs"][os.path.basename(path)] = _sha256_file(path)

    def write(self, out_dir):
        path = os.path.join(out_dir, "manifest.json")
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        return path


def _model_spec(cfg):
    family = cfg.require("model.family")
    zeros = cfg.get("model.structural_zeros", default="")
    zero_set = frozenset(int(v) for v in zeros.split(",") if v.strip() != "")
    if family == "independence":
        shape = _parse_shape(cfg.require("model.shape"), 2)
        return independence(*shape, structural_zeros=zero_set)
    if family == "all_two_way":
        shape = _parse_shape(cfg.require("model.shape"), 3)
        return all_two_way(*shape, structural_zeros=zero_set)
    if family == "beta_model":
        return beta_model(cfg.require("model.nodes", cast=int), structural_zeros=zero_set)
    raise ConfigError(f"unknown model.family {family!r}")


def _parse_shape(text, want):
    try:
        dims = tuple(int(p) for p in text.split("x"))
    except ValueError:
        raise ConfigError(f"model.shape {text!r} must look like 4x4 or 3x3x3") from None
    if len(dims) != want:
        raise ConfigError(f"model.shape {text!r} must have {want} dimensions")
    return dims


def _observed_data(cfg, spec, design):
    """Read the observed table or graph; returns (data, edges-or-None)."""
    if spec.family == "beta_model":
        path = cfg.require("data.graph")
        edges, max_id = read_edge_list(path)
        if max_id > spec.shape[0]:
            raise ValidationError(
                f"edge list mentions node {max_id}, model has {spec.shape[0]} nodes"
            )
        return observe_graph(spec, design, edges), edges
    path = cfg.require("data.table")
    dims, cells = read_table_csv(path)
    if dims != spec.shape:
        raise ValidationError(f"table dims {dims} do not match model shape {spec.shape}")
    return observe_table(spec, design, cells), None


def _mdp_config(cfg):
    return MdpConfig(
        gamma=cfg.get("mdp.gamma", 0.99, float),
        coeff_min=cfg.get("mdp.c1", -2, int),
        coeff_max=cfg.get("mdp.c2", 2, int),
        steps_per_episode=cfg.get("mdp.steps_per_episode", 100, int),
        discovered_point_cap=cfg.get("mdp.point_cap", 100_000, int),
    )


def _compute_moves(cfg, design, spec, edges):
    """Kernel basis, optionally via subdivide-and-lift on graph data."""
    strategy = cfg.get("decompose.strategy")
    if strategy is None:
        return compute_lattice_basis(design)
    if spec.family != "beta_model":
        raise ConfigError("decomposition applies only to graph (beta model) data")
    node_sets = None
    raw_sets = cfg.get("decompose.node_sets")
    if raw_sets:
        node_sets = [
            {int(v) - 1 for v in group.split(",") if v.strip() != ""}
            for group in raw_sets.split(";")
        ]
    subs = decompose_initial_point(
        edges,
        spec.shape[0],
        strategy,
        k=cfg.get("decompose.k", cast=int),
        node_sets=node_sets,
    )
    sub_bases = [compute_lattice_basis(s.sub_matrix) for s in subs]
    return lift_basis(sub_bases, subs, design.column_labels)


def _load_policy(cfg):
    policy_path = cfg.require("policy.file")
    basis_path = cfg.require("policy.basis")
    for path in (policy_path, basis_path):
        if not os.path.exists(path):
            raise ValidationError(f"referenced path does not exist: {path}")
    with open(policy_path) as fh:
        ac, want_sha = deserialize_policy(fh.read())
    if want_sha is not None and want_sha != _sha256_file(basis_path):
        raise IncompatiblePolicyError(
            "policy was trained against a different basis (checksum mismatch)"
        )
    return ac, load_basis(basis_path)


def _train_config(cfg):
    actor_sched, critic_sched = default_schedules(
        actor_scale=cfg.get("train.a0", 0.05, float),
        critic_scale=cfg.get("train.b0", 0.05, float),
        swap=cfg.get("train.swap_schedules", False, bool),
    )
    return TrainConfig(
        gamma=cfg.get("mdp.gamma", 0.99, float),
        lam=cfg.get("train.lambda", 0.5, float),
        window=cfg.get("train.window", 8, int),
        episodes=cfg.get("train.episodes", 1000, int),
        seed=cfg.seed,
        actor_schedule=actor_sched,
        critic_schedule=critic_sched,
    )


def run_train(cfg):
    manifest = Manifest("train", cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    manifest.start("ingest")
    spec = _model_spec(cfg)
    design = build_design_matrix(spec)
    data, edges = _observed_data(cfg, spec, design)
    manifest.finish()

    manifest.start("basis")
    basis = _compute_moves(cfg, design, spec, edges)
    basis_path = os.path.join(cfg.out_dir, "basis.txt")
    save_basis(basis_path, basis)
    manifest.record_output(basis_path)
    manifest.finish()

    manifest.start("train")
    env = FiberEnv(design, basis, data.counts, _mdp_config(cfg))
    mask = cfg.get("train.mask_k", "auto")
    if mask == "auto":
        mask_k = default_mask_k(design.n_cols)
    elif mask in ("none", "None"):
        mask_k = None
    else:
        mask_k = int(mask)
    hidden = tuple(
        int(v) for v in str(cfg.get("train.hidden", "64,64")).split(",") if v.strip()
    )
    ac = make_actor_critic(
        state_dim=design.n_cols,
        n_coeffs=basis.count,
        hidden=hidden,
        seed=cfg.seed,
        coeff_min=env.config.coeff_min,
        coeff_max=env.config.coeff_max,
        mask_k=mask_k,
        ball_radius=cfg.get("train.ball_radius", 1e3, float),
        input_scale=cfg.get("train.input_scale", max(1.0, float(data.counts.max())), float),
        sigma_min=cfg.get("train.sigma_min", default_sigma_min(design.n_cols), float),
    )
    log = train(env, ac, _train_config(cfg), start=data.counts)
    manifest.finish()

    manifest.start("write")
    log_path = os.path.join(cfg.out_dir, "trainlog.csv")
    write_train_log(log_path, log)
    manifest.record_output(log_path)
    policy_path = os.path.join(cfg.out_dir, "policy.txt")
    with open(policy_path, "w") as fh:
        fh.write(serialize_policy(ac, basis_sha256=_sha256_file(basis_path)))
    manifest.record_output(policy_path)
    manifest.finish()

    path = manifest.write(cfg.out_dir)
    if log:
        print(
            f"trained {len(log)} windows; final feasible fraction "
            f"{log[-1].feasible_fraction:.3f}, discovered {log[-1].discovered_count}"
        )
    print(f"wrote {path}")
    return 0


def run_sample(cfg):
    manifest = Manifest("sample", cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    manifest.start("ingest")
    spec = _model_spec(cfg)
    design = build_design_matrix(spec)
    data, _ = _observed_data(cfg, spec, design)
    ac, basis = _load_policy(cfg)
    if basis.dim != design.n_cols:
        raise IncompatiblePolicyError("basis dimension does not match the model")
    manifest.finish()

    manifest.start("sample")
    steps = cfg.get("sample.steps", 10_000, int)
    mode = cfg.get("sample.mode", "uniform")
    rng = np.random.default_rng(cfg.seed)
    from .models import fit_expected_counts

    expected = fit_expected_counts(spec, data)
    walker = mh_uniform if mode == "uniform" else explore
    if mode not in ("uniform", "explore"):
        raise ConfigError(f"sample.mode must be uniform or explore, got {mode!r}")
    sample, discovered = walker(
        ac, basis, data.counts, steps, rng, expected=expected, seed=cfg.seed
    )
    manifest.finish()

    manifest.start("write")
    sample_path = os.path.join(cfg.out_dir, "sample.csv")
    write_sample_csv(sample_path, sample, design.column_labels)
    manifest.record_output(sample_path)
    manifest.finish()
    manifest.data["discovered_count"] = discovered.count
    manifest.data["stuck"] = sample.stuck

    path = manifest.write(cfg.out_dir)
    print(f"{steps} steps, {discovered.count} distinct points")
    print(f"wrote {path}")
    return 0


def run_test(cfg):
    manifest = Manifest("test", cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    manifest.start("ingest")
    spec = _model_spec(cfg)
    design = build_design_matrix(spec)
    data, _ = _observed_data(cfg, spec, design)
    ac, basis = _load_policy(cfg)
    if basis.dim != design.n_cols:
        raise IncompatiblePolicyError("basis dimension does not match the model")
    manifest.finish()

    manifest.start("test")
    results = besag_clifford_pvalues(
        ac,
        basis,
        spec,
        data,
        chains=cfg.get("test.chains", 100, int),
        chain_length=cfg.get("test.chain_length", 100, int),
        seed=cfg.seed,
        chain_steps=cfg.get("test.chain_steps", cast=int),
    )
    manifest.finish()

    manifest.start("write")
    results_path = os.path.join(cfg.out_dir, "results.csv")
    with open(results_path, "w", newline="") as fh:
        fh.write("chain_id,seed,p_value,observed_statistic,sample_size,stuck\n")
        for r in results:
            fh.write(
                f"{r.chain_id},{r.seed},{repr(r.p_value)},"
                f"{repr(r.observed_statistic)},{r.sample_size},{int(r.stuck)}\n"
            )
    manifest.record_output(results_path)
    pvals_path = os.path.join(cfg.out_dir, "pvalues.csv")
    write_pvalues_csv(pvals_path, results)
    manifest.record_output(pvals_path)
    hist_path = os.path.join(cfg.out_dir, "histogram.csv")
    write_histogram_csv(hist_path, [r.p_value for r in results])
    manifest.record_output(hist_path)
    manifest.finish()

    path = manifest.write(cfg.out_dir)
    pvals = [r.p_value for r in results]
    print(f"{len(results)} chains; median p-value {float(np.median(pvals)):.4f}")
    print(f"wrote {path}")
    return 0


def run_enumerate(cfg):
    manifest = Manifest("enumerate", cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    manifest.start("ingest")
    spec = _model_spec(cfg)
    design = build_design_matrix(spec)
    data, _ = _observed_data(cfg, spec, design)
    manifest.finish()

    manifest.start("enumerate")
    points = enumerate_fiber(design, data.marginals, cap=cfg.get("enumerate.cap", 100_000, int))
    manifest.finish()

    manifest.start("write")
    fiber_path = os.path.join(cfg.out_dir, "fiber.csv")
    with open(fiber_path, "w", newline="") as fh:
        fh.write(",".join("_".join(str(v) for v in lab) for lab in design.column_labels))
        fh.write("\n")
        for point in sorted(points):
            fh.write(",".join(str(v) for v in point) + "\n")
    manifest.record_output(fiber_path)
    manifest.finish()
    manifest.data["fiber_size"] = len(points)

    path = manifest.write(cfg.out_dir)
    print(f"fiber has {len(points)} points")
    print(f"wrote {path}")
    return 0


def run_lift(cfg):
    manifest = Manifest("lift", cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    manifest.start("ingest")
    spec = _model_spec(cfg)
    design = build_design_matrix(spec)
    data, edges = _observed_data(cfg, spec, design)
    if edges is None:
        raise ConfigError("lift requires graph data (beta model)")
    if cfg.get("decompose.strategy") is None:
        raise ConfigError("lift requires decompose.strategy")
    manifest.finish()

    manifest.start("lift")
    basis = _compute_moves(cfg, design, spec, edges)
    manifest.finish()

    manifest.start("write")
    out_path = os.path.join(cfg.out_dir, "lifted_basis.txt")
    save_basis(out_path, basis)
    manifest.record_output(out_path)
    manifest.finish()
    manifest.data["lifted_moves"] = basis.count

    path = manifest.write(cfg.out_dir)
    print(f"lifted {basis.count} moves into dimension {basis.dim}")
    print(f"wrote {path}")
    return 0


_RUNNERS = {
    "train": run_train,
    "sample": run_sample,
    "test": run_test,
    "enumerate": run_enumerate,
    "lift": run_lift,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fiberwalk",
        description="Policy-driven fiber sampling and exact conditional tests",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="flat key=value config file")
        cmd.add_argument("--seed", type=int, default=None, help="overrides config seed")
        cmd.add_argument("--out", default="out", help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config, out_dir=args.out)
        if args.seed is not None:
            cfg.seed = args.seed
        return _RUNNERS[args.command](cfg)
    except FiberwalkError as exc:
        print(f"fiberwalk {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
