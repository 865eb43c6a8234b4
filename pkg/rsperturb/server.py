"""
Perturbation Server - solve, sweep and oracle runs behind one request interface

Each operation takes a RunConfig (object, dict or JSON text) and an output
directory, writes its artifacts and returns a result dictionary with
"success" and "exit_code". handle_request turns every exception into such a
dictionary: solver refusals get exit code 2, bad input exit code 1.
"""

from typing import Any, Dict, List, Optional, Tuple, Union
import json
import logging
import math
import os

import pandas as pd
from pydantic import ValidationError

from . import __version__
from .adaptive_split import SplitKind, SplitPolicy, apply_policy, quality_from_series
from .config import RunConfig
from .errors import ConstructionError, PerturbationError, SolverRefusal
from .operator_model import HamiltonianSplit
from .oracle_bench import build_oracle_report, direct_energy, fd_coefficients, sum_over_states
from .reports import output_header, sums_filename, write_csv, write_json
from .rs_hierarchy import PerturbationSeries, rs_series
from .series_eval import partial_sums, wavefunction_partial_sum

logger = logging.getLogger(__name__)

ConfigLike = Union[RunConfig, Dict[str, Any], str]

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_REFUSAL = 2


def exit_code_for(error: BaseException) -> int:
    return EXIT_REFUSAL if isinstance(error, SolverRefusal) else EXIT_INPUT


def error_result(error: BaseException) -> Dict[str, Any]:
    return {
        "success": False,
        "error": str(error),
        "error_type": type(error).__name__,
        "exit_code": exit_code_for(error),
        "order": getattr(error, "order", None),
    }


def _coerce_config(config: ConfigLike) -> RunConfig:
    if isinstance(config, RunConfig):
        return config
    if isinstance(config, str):
        return RunConfig.from_json(config)
    return RunConfig.model_validate(config)


def _target_dependent(policy: SplitPolicy) -> bool:
    return policy.kind is SplitKind.ITERATIVE_IMPROVE or (
        policy.kind is not SplitKind.NONE and policy.lambda0 is None)


class PerturbationServer:
    """
    Rayleigh-Schrodinger perturbation runs

    Drives model construction, re-splitting, the hierarchy, series
    evaluation and the oracles from a single run configuration.
    """

    def __init__(self):
        self.name = "rsperturb"
        self.version = __version__
        self.description = "Numerical Rayleigh-Schrodinger perturbation series with independent oracles"

        config_schema = {
            "type": "object",
            "description": "Run configuration (see README for every field and default)",
        }
        out_schema = {"type": "string", "description": "Output directory"}
        self.capabilities = {
            "tools": [
                {
                    "name": "solve",
                    "description": "Compute the series of one state and evaluate it at every lambda target",
                    "inputSchema": {
                        "type": "object",
                        "properties": {"config": config_schema, "out_dir": out_schema},
                        "required": ["config"],
                    },
                },
                {
                    "name": "sweep",
                    "description": "Compare split policies over all lambda targets in one CSV",
                    "inputSchema": {
                        "type": "object",
                        "properties": {"config": config_schema, "out_dir": out_schema},
                        "required": ["config"],
                    },
                },
                {
                    "name": "oracle",
                    "description": "Direct energies, finite-difference coefficients and slope checks",
                    "inputSchema": {
                        "type": "object",
                        "properties": {"config": config_schema, "out_dir": out_schema},
                        "required": ["config"],
                    },
                },
            ]
        }

    # Shared pieces

    def _header(self, config: RunConfig) -> Dict[str, str]:
        return output_header(config.config_hash(), self.version)

    def _series_for(self, config: RunConfig, base: HamiltonianSplit, policy: SplitPolicy,
                    target: float) -> Tuple[HamiltonianSplit, PerturbationSeries]:
        settings = config.settings.to_settings()
        split = apply_policy(base, policy, config.state_index, settings,
                             lambda_target=target, K=config.order)
        folded = target if split.has_constant else None
        series = rs_series(split, config.state_index, config.order, settings, lambda_target=folded)
        return split, series

    def _agreement(self, config: RunConfig, split: HamiltonianSplit,
                   series: PerturbationSeries) -> Dict[str, Any]:
        """Hierarchy coefficients against finite differences (and optionally sum over states)"""
        K = min(config.oracle.fd_order, series.order)
        if series.folded_target is not None:
            return {"status": "skipped", "message": "folded series has no Taylor coefficients"}
        settings = config.settings.to_settings()
        try:
            estimates = fd_coefficients(split, config.state_index, K, config.oracle.fd_step, settings)
        except SolverRefusal as e:
            logger.warning("Coefficient agreement unavailable: %s", e)
            return {"status": type(e).__name__, "message": str(e), "fd_step": config.oracle.fd_step}
        reference = None
        if config.oracle.sum_over_states:
            reference = sum_over_states(split, config.state_index, K)
        rows = []
        for est in estimates:
            hierarchy = series.energies[est.order]
            diff = abs(hierarchy - est.estimate)
            row = {
                "k": est.order,
                "hierarchy": hierarchy,
                "fd": est.estimate,
                "fd_error": est.error,
                "abs_diff": diff,
                "agrees": bool(diff <= max(1e-6, 10.0 * est.error)),
            }
            if reference is not None:
                row["sum_over_states"] = reference[est.order]
            rows.append(row)
        return {"status": "ok", "fd_step": config.oracle.fd_step, "rows": rows}

    # Operations

    def solve(self, config: ConfigLike, out_dir: Optional[str] = None) -> Dict[str, Any]:
        """
        Series for one state, partial sums at every target and a quality report.

        Writes series.json, sums_<state>_<lambda>.csv and report.json.
        """
        config = _coerce_config(config)
        base = config.model.build_split()
        policy = config.policy.to_policy()
        targets = list(config.lambda_targets)
        settings = config.settings.to_settings()

        cache: Dict[Any, Tuple[HamiltonianSplit, PerturbationSeries, List[float]]] = {}
        order_of_keys: List[Any] = []
        for target in targets or [None]:
            key = target if _target_dependent(policy) else None
            if key in cache:
                cache[key][2].append(target)
                continue
            split, series = self._series_for(config, base, policy, target)
            if series.folded_target is not None and key is None:
                key = target
            cache[key] = (split, series, [target] if target is not None else [])
            order_of_keys.append(key)

        series_docs, report_targets, sums_frames = [], [], []
        agreements = []
        for key in order_of_keys:
            split, series, served = cache[key]
            doc = series.to_dict(include_vectors=config.output.include_vectors)
            doc["lambda_targets"] = served
            doc["condition"] = series.condition
            if config.output.include_vectors:
                doc["wavefunctions"] = {
                    repr(t): wavefunction_partial_sum(series, t, series.order).tolist()
                    for t in served}
            series_docs.append(doc)
            if config.oracle.enabled:
                agreements.append(self._agreement(config, split, series))

            for target in served:
                trace = partial_sums(series, target)
                entry: Dict[str, Any] = {
                    "lambda": target,
                    "lambda_ref": series.lambda_ref,
                    "K": series.order,
                    "partial_sum": trace.sums[-1],
                    "k_opt": trace.k_opt,
                    "optimal_sum": trace.sums[trace.k_opt],
                    "tail_weight": series.tail_weight,
                    "quality": (quality_from_series(series, series.order, target).to_dict()
                                if series.order >= 1 else None),
                }
                if config.oracle.enabled:
                    energy = direct_energy(base, target, config.state_index, settings)
                    trace = trace.with_oracle(energy)
                    entry["direct_energy"] = energy
                    entry["abs_error"] = abs(trace.sums[-1] - energy)
                report_targets.append(entry)
                sums_frames.append((target, trace.to_frame()))

        header = self._header(config)
        directory = out_dir or "."
        files = []
        if "json" in config.output.formats:
            series_payload = {
                "model": config.model.model_dump(mode="json"),
                "policy": policy.to_dict(),
                "state_index": config.state_index,
                "order": config.order,
                "series": [{k: v for k, v in doc.items() if k != "condition"}
                           for doc in series_docs],
            }
            files.append(write_json(os.path.join(directory, "series.json"), header, series_payload))
            report_payload = {
                "settings": settings.to_dict(),
                "condition": [doc["condition"] for doc in series_docs],
                "targets": report_targets,
                "coefficient_agreement": agreements,
            }
            files.append(write_json(os.path.join(directory, "report.json"), header, report_payload))
        if "csv" in config.output.formats:
            for target, frame in sums_frames:
                path = sums_filename(config.state_index, target, directory)
                files.append(write_csv(path, header, frame))

        logger.info("Solve done: %d series, %d targets", len(series_docs), len(report_targets))
        return {
            "success": True,
            "exit_code": EXIT_OK,
            "energies": list(series_docs[0]["energies"]),
            "targets": report_targets,
            "files": files,
        }

    def sweep(self, config: ConfigLike, out_dir: Optional[str] = None) -> Dict[str, Any]:
        """
        One row per (policy, lambda target); failed rows keep their error in
        the status and message columns.
        """
        config = _coerce_config(config)
        if not config.lambda_targets:
            raise ConstructionError("sweep needs at least one lambda target")
        base = config.model.build_split()
        settings = config.settings.to_settings()

        rows: List[Dict[str, Any]] = []
        refusals = 0
        for policy in config.all_policies():
            for target in config.lambda_targets:
                row = {
                    "policy": policy.label,
                    "lambda": target,
                    "K": config.order,
                    "partial_sum": math.nan,
                    "oracle_energy": math.nan,
                    "abs_error": math.nan,
                    "k_opt": -1,
                    "status": "ok",
                    "message": "",
                }
                try:
                    _, series = self._series_for(config, base, policy, target)
                    trace = partial_sums(series, target)
                    row["partial_sum"] = trace.sums[-1]
                    row["k_opt"] = trace.k_opt
                    if config.oracle.enabled:
                        energy = direct_energy(base, target, config.state_index, settings)
                        row["oracle_energy"] = energy
                        row["abs_error"] = abs(trace.sums[-1] - energy)
                except PerturbationError as e:
                    refusals += isinstance(e, SolverRefusal)
                    row["status"] = type(e).__name__
                    row["message"] = str(e)
                    logger.warning("Sweep row %s at lambda=%g failed: %s", policy.label, target, e)
                rows.append(row)

        successful = sum(1 for r in rows if r["status"] == "ok")
        failed = len(rows) - successful
        files = []
        if "csv" in config.output.formats:
            frame = pd.DataFrame(rows, columns=["policy", "lambda", "K", "partial_sum",
                                                "oracle_energy", "abs_error", "k_opt",
                                                "status", "message"])
            files.append(write_csv(os.path.join(out_dir or ".", "sweep.csv"),
                                   self._header(config), frame))
        if successful:
            exit_code = EXIT_OK
        else:
            exit_code = EXIT_REFUSAL if refusals else EXIT_INPUT
        logger.info("Sweep done: %d/%d rows succeeded", successful, len(rows))
        return {
            "success": successful > 0,
            "exit_code": exit_code,
            "total_rows": len(rows),
            "successful": successful,
            "failed": failed,
            "rows": rows,
            "files": files,
        }

    def oracle(self, config: ConfigLike, out_dir: Optional[str] = None) -> Dict[str, Any]:
        """Direct energies on the grid, finite-difference coefficients, optional slopes"""
        config = _coerce_config(config)
        split = config.model.build_split()
        settings = config.settings.to_settings()
        series = None
        if config.oracle.slope_grid:
            series = rs_series(split, config.state_index, config.order, settings)
        report = build_oracle_report(
            split,
            config.state_index,
            config.oracle_grid(split.lambda_ref),
            config.oracle.fd_order,
            config.oracle.fd_step,
            settings,
            series=series,
            slope_grid=config.oracle.slope_grid,
            with_sum_over_states=config.oracle.sum_over_states,
        )
        header = self._header(config)
        directory = out_dir or "."
        files = []
        if "json" in config.output.formats:
            files.append(write_json(os.path.join(directory, "oracle.json"), header, report.to_dict()))
        if "csv" in config.output.formats:
            files.append(write_csv(os.path.join(directory, "oracle_energies.csv"), header,
                                   report.energies_frame()))
        return {
            "success": True,
            "exit_code": EXIT_OK,
            "fd_coefficients": [c.estimate for c in report.fd_coefficients],
            "fd_errors": [c.error for c in report.fd_coefficients],
            "energies": [p.energy for p in report.energies],
            "files": files,
        }

    def handle_request(self, method: str, params: Dict[str, Any]) -> Dict[str, Any]:
        """Dispatch a request; exceptions become error dictionaries"""
        try:
            if method == "solve":
                return self.solve(**params)
            elif method == "sweep":
                return self.sweep(**params)
            elif method == "oracle":
                return self.oracle(**params)
            else:
                return {"success": False, "error": f"Unknown method: {method}",
                        "error_type": "UnknownMethod", "exit_code": EXIT_INPUT, "order": None}
        except (PerturbationError, ValidationError, json.JSONDecodeError, OSError) as e:
            logger.debug("request %s failed", method, exc_info=True)
            return error_result(e)
        except Exception as e:
            logger.exception("Unexpected failure in %s", method)
            return error_result(e)

    def get_server_info(self) -> Dict[str, Any]:
        """Get server information"""
        return {
            "name": self.name,
            "version": self.version,
            "description": self.description,
            "operations": len(self.capabilities["tools"])
        }
