"""Experiment runners: scenario decoding pipelines, manifests, CSV emission.

Each runner resolves a config into one or more scenarios, decodes Monte
Carlo slots, and writes CSV tables plus a JSON manifest sufficient to
reproduce every file bit-for-bit in deterministic mode.  Decoders only ever
see (Y, priors, SE); ground truth enters metrics and nothing else.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import time
from pathlib import Path

import numpy as np

from . import __version__
from .airlink import sample_slot
from .amp import AmpTrace, run_amp
from .denoiser import prepare
from .detection import build_roc, calibrate_equal_error, classify, error_counts, np_scores
from .genie_mmse import aggregate_mse, analytic_mse_all, build_context, estimate_all
from .positioning import error_cdf, map_indices, oracle_position
from .rng import RngStreams, STREAM_NAMES
from .scenario import Scenario, ScenarioConfig, build_scenario
from .state_evolution import SeTrace, channel_error_active, run_se

log = logging.getLogger(__name__)

CDF_PROBS = np.round(np.linspace(0.0, 1.0, 201)[1:], 4)


# ---------------------------------------------------------------------------
# manifest plumbing


def manifest_hash(cfg: ScenarioConfig, scenario: Scenario) -> str:
    payload = json.dumps(
        {
            "config": cfg.to_dict(),
            "geometry": scenario.geometry.to_dict(),
            "version": __version__,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


class RunWriter:
    """Collects CSV artifacts for one runner invocation and writes the manifest."""

    def __init__(self, out_dir, cfg: ScenarioConfig, scenario: Scenario, execution: dict | None = None):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.scenario = scenario
        self.execution = execution or {}
        self.hash = manifest_hash(cfg, scenario)
        self.artifacts = []
        self._t0 = time.time()

    def write_csv(self, name: str, header: list, rows: list) -> Path:
        path = self.out_dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header + ["manifest_hash"])
            for row in rows:
                w.writerow(list(row) + [self.hash])
        self.artifacts.append(name)
        return path

    def finalize(self, name: str = "manifest.json") -> Path:
        manifest = {
            "manifest_hash": self.hash,
            "version": __version__,
            "config": self.cfg.to_dict(),
            "execution": self.execution,
            "rng": RngStreams(self.cfg.seed).manifest_entry(),
            "geometry": self.scenario.geometry.to_dict(),
            "grids": [
                {
                    "location": u,
                    "lambda": p.lam,
                    "points": p.grid.points.tolist(),
                    "weights": p.grid.weights.tolist(),
                }
                for u, p in enumerate(self.scenario.priors)
            ],
            "wall_clock_s": round(time.time() - self._t0, 3),
            "artifacts": self.artifacts,
        }
        path = self.out_dir / name
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        return path


# ---------------------------------------------------------------------------
# shared decode pipeline


def _variant_config(cfg: ScenarioConfig, variant: str) -> ScenarioConfig:
    if variant == "lb-matched":
        return cfg.replace(mode="location_based", denoiser_mode="matched")
    if variant == "lb-mismatched":
        return cfg.replace(mode="location_based", denoiser_mode="mismatched")
    if variant == "sc":
        return cfg.replace(mode="single_codebook", denoiser_mode="matched")
    raise ValueError(f"unknown variant {variant!r} (lb-matched | lb-mismatched | sc)")


def _se_for(scenario: Scenario, streams: RngStreams) -> SeTrace:
    cfg = scenario.cfg
    return run_se(
        scenario.priors,
        scenario.alphas,
        scenario.noise.sigma_w2,
        cfg.amp_iterations,
        cfg.se_samples,
        streams.generator("se"),
    )


def _decode_run(scenario: Scenario, streams: RngStreams, se_trace: SeTrace, run: int):
    """One Monte Carlo slot: sample, decode, return (truth, trace)."""
    cfg = scenario.cfg
    codebooks, truth, signal = sample_slot(
        scenario,
        streams.generator("codebook", run),
        streams.generator("truth", run),
        streams.generator("noise", run),
    )
    trace = run_amp(
        signal.y,
        codebooks,
        scenario.priors,
        scenario.noise.sigma_w2,
        cfg.amp_iterations,
        onsager_mode=cfg.onsager_mode,
        c_source=cfg.c_source,
        se_trace=se_trace,
        truth=truth,
        rng=streams.generator("se", run) if cfg.onsager_mode == "se" else None,
    )
    return codebooks, truth, trace


def _final_scores(scenario: Scenario, trace: AmpTrace):
    """NP activity scores per location from the decoder's final state."""
    out = []
    for u, prior in enumerate(scenario.priors):
        ws = prepare(prior, trace.c_final)
        out.append(np_scores(ws, trace.r_final[u]))
    return out


def _calibrated_thresholds(scenario: Scenario, se_trace: SeTrace, streams: RngStreams, samples: int = 20000):
    c_final = se_trace.cov(se_trace.iterations)
    rng = streams.generator("calibration")
    return [
        calibrate_equal_error(prior, c_final, samples, rng)
        for prior in scenario.priors
    ]


# ---------------------------------------------------------------------------
# runners


def run_se_comparison(cfg: ScenarioConfig, out_dir, variants=("lb-matched", "lb-mismatched", "sc"), execution=None):
    """State-evolution vs finite-size AMP normalized MSE, per iteration.

    Empirical curves report both the pooled ratio across runs (sum of error
    energies over sum of signal energies: the consistent estimator of the SE
    quantity) and the per-run mean with its standard error.
    """
    results = {}
    writer = None
    rows = []
    diag_rows = []
    for variant in variants:
        vcfg = _variant_config(cfg, variant)
        scenario = build_scenario(vcfg)
        if writer is None:
            writer = RunWriter(out_dir, cfg, scenario, execution)
        streams = RngStreams(vcfg.seed)
        se_trace = _se_for(scenario, streams)
        t_iter = vcfg.amp_iterations
        num = np.zeros(t_iter + 1)
        den_total = 0.0
        per_run = []
        for r in range(vcfg.runs):
            t0 = time.time()
            _, truth, trace = _decode_run(scenario, streams, se_trace, r)
            den = sum(float(np.sum(np.abs(x) ** 2)) for x in truth.channels)
            if den == 0.0:
                log.warning("%s run %d: no active messages, skipped in MSE stats", variant, r)
                continue
            num += np.asarray(trace.mse) * den
            den_total += den
            per_run.append(trace.mse)
            for t, m in enumerate(trace.mse[:-1], start=1):
                diag_rows.append(
                    (variant, r, t, f"{m:.8e}",
                     f"{np.trace(trace.covariances[t - 1]).real:.8e}",
                     f"{time.time() - t0:.3f}")
                )
        per_run = np.asarray(per_run)
        pooled = num / den_total
        mean = per_run.mean(axis=0)
        stderr = per_run.std(axis=0, ddof=1) / np.sqrt(len(per_run)) if len(per_run) > 1 else np.zeros_like(mean)
        scen_name, dmode = ("sc", "matched") if variant == "sc" else ("lb", variant.split("-")[1])
        for t in range(1, t_iter + 1):
            rows.append(
                (scen_name, dmode, t,
                 f"{se_trace.predicted_mse[t - 1]:.8e}",
                 f"{pooled[t - 1]:.8e}",
                 f"{mean[t - 1]:.8e}",
                 f"{stderr[t - 1]:.8e}",
                 len(per_run))
            )
        results[variant] = {
            "se": np.asarray(se_trace.predicted_mse),
            "pooled": pooled,
            "mean": mean,
            "stderr": stderr,
            "runs": len(per_run),
        }
    writer.write_csv(
        "se_compare.csv",
        ["scenario", "denoiser_mode", "t", "se_mse", "emp_mse_pooled", "emp_mse_mean", "emp_mse_stderr", "runs"],
        rows,
    )
    writer.write_csv(
        "se_compare_diagnostics.csv",
        ["variant", "run", "t", "normalized_mse", "trace_c", "wall_s"],
        diag_rows,
    )
    results["manifest"] = writer.finalize("se_compare_manifest.json")
    return results


def run_roc(cfg: ScenarioConfig, out_dir, variants=("lb-matched", "lb-mismatched", "sc"), n_taus: int = 60, execution=None):
    """MD/FA tradeoff sweep plus the calibrated equal-error operating point."""
    results = {}
    writer = None
    rows = []
    for variant in variants:
        vcfg = _variant_config(cfg, variant)
        scenario = build_scenario(vcfg)
        if writer is None:
            writer = RunWriter(out_dir, cfg, scenario, execution)
        streams = RngStreams(vcfg.seed)
        se_trace = _se_for(scenario, streams)
        taus_u = _calibrated_thresholds(scenario, se_trace, streams)

        scores_all = [[] for _ in scenario.priors]
        active_all = [[] for _ in scenario.priors]
        for r in range(vcfg.runs):
            _, truth, trace = _decode_run(scenario, streams, se_trace, r)
            for u, s in enumerate(_final_scores(scenario, trace)):
                scores_all[u].append(s)
                active_all[u].append(truth.active[u])
        scores_by_loc = [np.concatenate(s) for s in scores_all]
        active_by_loc = [np.concatenate(a) for a in active_all]

        pooled = np.concatenate(scores_by_loc)
        qs = np.quantile(pooled, np.linspace(0.0, 1.0, n_taus - 1))
        log_taus = np.unique(np.concatenate([qs, [pooled.max() + 1.0]]))
        curve = build_roc(scores_by_loc, active_by_loc, log_taus)

        # calibrated per-location operating point, pooled counts
        fa = md = n_act = n_inact = 0
        for u, tau in enumerate(taus_u):
            f, m = error_counts([scores_by_loc[u]], [active_by_loc[u]], [tau])
            fa += f[0]
            md += m[0]
            n_act += int(active_by_loc[u].sum())
            n_inact += int(len(active_by_loc[u]) - active_by_loc[u].sum())
        p_fa_op = fa / n_inact if n_inact else np.nan
        p_md_op = md / n_act if n_act else np.nan

        scen_name, dmode = ("sc", "matched") if variant == "sc" else ("lb", variant.split("-")[1])
        for tau, p_fa, p_md in zip(curve.log_taus, curve.p_fa, curve.p_md):
            rows.append((scen_name, dmode, "sweep", f"{tau:.6e}", f"{p_fa:.6e}", f"{p_md:.6e}", vcfg.runs))
        rows.append((scen_name, dmode, "equal_error", "", f"{p_fa_op:.6e}", f"{p_md_op:.6e}", vcfg.runs))
        results[variant] = {
            "curve": curve,
            "operating_point": (p_fa_op, p_md_op),
            "thresholds": taus_u,
            "scores": scores_by_loc,
            "active": active_by_loc,
        }
    writer.write_csv(
        "roc.csv",
        ["scenario", "denoiser_mode", "kind", "tau_log", "p_fa", "p_md", "n_trials"],
        rows,
    )
    results["manifest"] = writer.finalize("roc_manifest.json")
    return results


def _detected_sets(scenario: Scenario, truth, trace: AmpTrace, taus_u):
    """Per-location DetectionOutcome at the calibrated thresholds."""
    outcomes = []
    for u, (scores, tau) in enumerate(zip(_final_scores(scenario, trace), taus_u)):
        outcomes.append(classify(scores, truth.active[u], tau))
    return outcomes


def run_position_cdf(cfg: ScenarioConfig, out_dir, variants=("lb-matched", "sc"), execution=None):
    """Torus-metric position-error CDFs over correctly detected messages,
    for the MAP estimator and the nearest-grid-point oracle."""
    results = {}
    writer = None
    rows = []
    for variant in variants:
        vcfg = _variant_config(cfg, variant)
        scenario = build_scenario(vcfg)
        if writer is None:
            writer = RunWriter(out_dir, cfg, scenario, execution)
        streams = RngStreams(vcfg.seed)
        se_trace = _se_for(scenario, streams)
        taus_u = _calibrated_thresholds(scenario, se_trace, streams)

        err_map, err_oracle = [], []
        for r in range(vcfg.runs):
            _, truth, trace = _decode_run(scenario, streams, se_trace, r)
            outcomes = _detected_sets(scenario, truth, trace, taus_u)
            for u, (prior, out) in enumerate(zip(scenario.priors, outcomes)):
                if len(out.detected) == 0:
                    continue
                ws = prepare(prior, trace.c_final)
                rows_r = trace.r_final[u][out.detected]
                idx, _ = map_indices(ws, rows_r)
                pos_of = {int(n): truth.positions[u][j] for j, n in enumerate(truth.indices[u])}
                torus = prior.grid.torus
                for n, gi in zip(out.detected, idx):
                    q0 = pos_of[int(n)]
                    oi = oracle_position(q0, prior.grid)
                    err_map.append(float(torus.distance(prior.grid.points[gi], q0)))
                    err_oracle.append(float(torus.distance(prior.grid.points[oi], q0)))

        scen_name = "sc" if variant == "sc" else "lb"
        dmode = "matched" if variant != "lb-mismatched" else "mismatched"
        for est, errors in (("map", err_map), ("oracle", err_oracle)):
            probs, values = error_cdf(np.asarray(errors), CDF_PROBS)
            for p, v in zip(probs, values):
                rows.append((scen_name, dmode, est, f"{p:.4f}", f"{v:.8e}", len(errors)))
        results[variant] = {
            "map": np.asarray(err_map),
            "oracle": np.asarray(err_oracle),
        }
    writer.write_csv(
        "position_cdf.csv",
        ["scenario", "denoiser_mode", "estimator", "p", "error_km", "n_samples"],
        rows,
    )
    results["manifest"] = writer.finalize("position_cdf_manifest.json")
    return results


def run_position_snapshot(cfg: ScenarioConfig, out_dir, location: int | None = None, message: int | None = None, execution=None):
    """Per-grid-point MAP objective for one detected message, plus the truth,
    estimate and tile outline, for the heat-map figure."""
    vcfg = _variant_config(cfg, "lb-matched")
    scenario = build_scenario(vcfg)
    writer = RunWriter(out_dir, cfg, scenario, execution)
    streams = RngStreams(vcfg.seed)
    se_trace = _se_for(scenario, streams)
    taus_u = _calibrated_thresholds(scenario, se_trace, streams)
    _, truth, trace = _decode_run(scenario, streams, se_trace, 0)
    outcomes = _detected_sets(scenario, truth, trace, taus_u)

    candidates = [
        (u, int(n))
        for u, out in enumerate(outcomes)
        for n in out.detected
        if location is None or u == location
    ]
    if not candidates:
        raise RuntimeError("no detected message to snapshot (try another location or seed)")
    if message is not None:
        want = [(u, n) for u, n in candidates if n == message]
        if not want:
            raise RuntimeError(f"message {message} not among detected candidates")
        u, n = want[0]
    else:
        u, n = candidates[0]

    prior = scenario.priors[u]
    ws = prepare(prior, trace.c_final)
    idx, obj = map_indices(ws, trace.r_final[u][[n]])
    gi = int(idx[0])
    j = list(truth.indices[u]).index(n)
    q0 = truth.positions[u][j]
    oi = oracle_position(q0, prior.grid)

    rows = []
    for g, (pt, val) in enumerate(zip(prior.grid.points, obj[0])):
        rows.append(("grid", u, n, g, f"{pt[0]:.8f}", f"{pt[1]:.8f}", f"{val:.6e}"))
    rows.append(("truth", u, n, "", f"{q0[0]:.8f}", f"{q0[1]:.8f}", ""))
    rows.append(("estimate", u, n, gi, f"{prior.grid.points[gi][0]:.8f}", f"{prior.grid.points[gi][1]:.8f}", f"{obj[0][gi]:.6e}"))
    rows.append(("oracle", u, n, oi, f"{prior.grid.points[oi][0]:.8f}", f"{prior.grid.points[oi][1]:.8f}", ""))
    tile = prior.tile
    for v in tile.vertices:
        rows.append(("vertex", u, n, "", f"{v[0]:.8f}", f"{v[1]:.8f}", ""))
    writer.write_csv(
        "position_snapshot.csv",
        ["role", "location", "message", "grid_index", "x_km", "y_km", "objective"],
        rows,
    )
    path = writer.finalize("position_snapshot_manifest.json")
    return {"location": u, "message": n, "grid_index": gi, "manifest": path}


def run_channel_mse_sweep(cfg: ScenarioConfig, out_dir, snr_list=(0.0, 5.0, 10.0), variants=("lb-matched",), execution=None):
    """Detected-set channel MSE per component vs receive SNR: genie-aided
    MMSE (analytic, Monte Carlo averaged), finite AMP, and the SE prediction."""
    results = {}
    writer = None
    rows = []
    for snr_rx_db in snr_list:
        for variant in variants:
            vcfg = _variant_config(cfg, variant).replace(snr_rx_db=float(snr_rx_db))
            scenario = build_scenario(vcfg)
            if writer is None:
                writer = RunWriter(out_dir, cfg, scenario, execution)
            streams = RngStreams(vcfg.seed)
            se_trace = _se_for(scenario, streams)
            taus_u = _calibrated_thresholds(scenario, se_trace, streams)
            f = scenario.geometry.n_antennas
            m = scenario.geometry.antennas_per_ru

            amp_aggs, genie_aggs = [], []
            for r in range(vcfg.runs):
                codebooks, truth, trace = _decode_run(scenario, streams, se_trace, r)
                outcomes = _detected_sets(scenario, truth, trace, taus_u)
                ctx = build_context(codebooks, truth, scenario.geometry, scenario.noise.sigma_w2)
                genie_mse_msg = analytic_mse_all(ctx)  # (K, B) per coefficient
                amp_errs, genie_errs = [], []
                for u, out in enumerate(outcomes):
                    if len(out.detected) == 0:
                        amp_errs.append(np.empty(0))
                        genie_errs.append(np.empty(0))
                        continue
                    pos_of = {int(n): j for j, n in enumerate(truth.indices[u])}
                    amp_loc, genie_loc = [], []
                    for n in out.detected:
                        h_true = truth.channels[u][n]
                        amp_loc.append(float(np.sum(np.abs(trace.x_hat[u][n] - h_true) ** 2)))
                        k = ctx.index[(u, int(n))]
                        genie_loc.append(float(genie_mse_msg[k].sum() * m))
                    amp_errs.append(np.asarray(amp_loc))
                    genie_errs.append(np.asarray(genie_loc))
                a = aggregate_mse(amp_errs, f)
                g = aggregate_mse(genie_errs, f)
                if a is not None:
                    amp_aggs.append(a)
                if g is not None:
                    genie_aggs.append(g)

            se_err = channel_error_active(
                scenario.priors, se_trace.cov(se_trace.iterations), vcfg.se_samples, streams.generator("se", 10**6)
            )
            se_pred = float(np.mean(se_err))

            scen_tag = "amp_matched" if variant == "lb-matched" else ("amp_mismatched" if variant == "lb-mismatched" else "amp_sc")
            rows.append((f"{snr_rx_db:g}", scen_tag, f"{np.mean(amp_aggs):.8e}", len(amp_aggs)))
            if variant == "lb-matched":
                rows.append((f"{snr_rx_db:g}", "genie", f"{np.mean(genie_aggs):.8e}", len(genie_aggs)))
                rows.append((f"{snr_rx_db:g}", "se_prediction", f"{se_pred:.8e}", len(se_err)))
            results[(float(snr_rx_db), variant)] = {
                "amp": float(np.mean(amp_aggs)),
                "genie": float(np.mean(genie_aggs)),
                "se_prediction": se_pred,
            }
    writer.write_csv(
        "channel_mse.csv",
        ["snr_rx_db", "estimator", "mse", "runs"],
        rows,
    )
    results["manifest"] = writer.finalize("channel_mse_manifest.json")
    return results
