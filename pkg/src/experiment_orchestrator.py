"""
Experiment Orchestrator
Connects the training stages using a LangGraph workflow
"""
import logging
from dataclasses import replace
from typing import Callable, Dict, TypedDict

import numpy as np
from langgraph.graph import StateGraph, START, END

from .errors import NumericError
from .pipeline import (
    BASELINE_RUN,
    DNN_RUNS,
    SOURCE_RUN,
    TRANSFER_RUN,
    ExperimentOutcome,
    ForecastResult,
    RunReport,
    assemble_report,
    evaluate_model,
    train_baseline,
    train_dnn,
    train_source,
    train_transfer,
)
from .settings import TrainConfig
from .sncurve_data import SnSeries, split_series

logger = logging.getLogger(__name__)


class ExperimentState(TypedDict):
    """State passed between stages"""
    axial: SnSeries
    torsional: SnSeries
    models: Dict
    histories: Dict[str, np.ndarray]
    forecasts: Dict[str, ForecastResult]
    runs: Dict[str, RunReport]
    report: object


def _banner(title: str) -> None:
    logger.info("=" * 70)
    logger.info(title)
    logger.info("=" * 70)


class ExperimentOrchestrator:
    def __init__(self, config: TrainConfig, store=None):
        """Initialize orchestrator; store, when given, persists every stage's artifacts"""
        self.config = config
        self.store = store
        self.workflow = self._build_workflow()

    def _build_workflow(self):
        """Build LangGraph workflow"""
        workflow = StateGraph(ExperimentState)

        workflow.add_node("prepare_data", self._prepare_data_node)
        workflow.add_node("source_training", self._source_node)
        workflow.add_node("transfer_training", self._transfer_node)
        workflow.add_node("baseline_training", self._baseline_node)
        workflow.add_node("dnn_training", self._dnn_node)
        workflow.add_node("finalize", self._finalize_node)

        workflow.add_edge(START, "prepare_data")
        workflow.add_edge("prepare_data", "source_training")
        workflow.add_edge("source_training", "transfer_training")
        workflow.add_edge("transfer_training", "baseline_training")
        workflow.add_edge("baseline_training", "dnn_training")
        workflow.add_edge("dnn_training", "finalize")
        workflow.add_edge("finalize", END)

        return workflow.compile()

    # -------------------------------------------------------------- helpers
    def _execute(self, state: ExperimentState, run: str, series: SnSeries, train: Callable) -> ExperimentState:
        """Train, evaluate and persist one run; a numeric failure only marks this run"""
        try:
            model, history = train()
            summary, forecast = evaluate_model(model, series, run)
        except NumericError as e:
            logger.error(f"❌ {run} failed: {e}")
            state["runs"][run] = RunReport(run=run, dataset=series.label, failed=True, error=str(e))
            return state

        forecast = replace(forecast, loss_history=history)
        state["models"][run] = model
        state["histories"][run] = history
        state["forecasts"][run] = forecast
        state["runs"][run] = RunReport(run=run, dataset=series.label, summary=summary)
        if summary.test_rmse_mpa is not None:
            logger.info(f"✅ {run}: test RMSE {summary.test_rmse_mpa:.3f} MPa")

        if self.store is not None:
            self.store.write_checkpoint(run, model)
            self.store.write_losses(run, history)
            self.store.write_forecast(forecast)
            self.store.write_summary(summary)
        return state

    # ---------------------------------------------------------------- nodes
    def _prepare_data_node(self, state: ExperimentState) -> ExperimentState:
        _banner("📦 STAGE 1: DATA PREPARATION")
        for label in ("axial", "torsional"):
            series = split_series(state[label], self.config.train_count(label))
            state[label] = series
            logger.info(f"   {label}: {series.train_count} training / {len(series) - series.train_count} test points")
        return state

    def _source_node(self, state: ExperimentState) -> ExperimentState:
        _banner("🧠 STAGE 2: SOURCE LSTM (AXIAL)")
        return self._execute(state, SOURCE_RUN, state["axial"], lambda: train_source(state["axial"], self.config))

    def _transfer_node(self, state: ExperimentState) -> ExperimentState:
        _banner("🔀 STAGE 3: TRANSFER LSTM (TORSIONAL)")
        source = state["models"].get(SOURCE_RUN)
        if source is None:
            logger.error(f"❌ {TRANSFER_RUN} skipped: source model unavailable")
            state["runs"][TRANSFER_RUN] = RunReport(
                run=TRANSFER_RUN, dataset="torsional", failed=True, error="source model unavailable",
            )
            return state
        return self._execute(
            state, TRANSFER_RUN, state["torsional"],
            lambda: train_transfer(source, state["torsional"], self.config),
        )

    def _baseline_node(self, state: ExperimentState) -> ExperimentState:
        _banner("📉 STAGE 4: BASELINE LSTM (TORSIONAL)")
        return self._execute(
            state, BASELINE_RUN, state["torsional"], lambda: train_baseline(state["torsional"], self.config),
        )

    def _dnn_node(self, state: ExperimentState) -> ExperimentState:
        _banner("🧮 STAGE 5: DNN BASELINES")
        for label in ("axial", "torsional"):
            series = state[label]
            state = self._execute(state, DNN_RUNS[label], series, lambda: train_dnn(series, self.config))
        return state

    def _finalize_node(self, state: ExperimentState) -> ExperimentState:
        _banner("📋 FINALIZATION")
        report = assemble_report(self.config.seed, state["runs"], state["torsional"])
        state["report"] = report
        if self.store is not None:
            self.store.write_report(report)
        return state

    def run(self, axial: SnSeries, torsional: SnSeries) -> ExperimentOutcome:
        """Run the complete experiment workflow"""
        _banner("🚀 TR-LSTM S-N CURVE EXPERIMENT")

        initial_state = {
            "axial": axial,
            "torsional": torsional,
            "models": {},
            "histories": {},
            "forecasts": {},
            "runs": {},
            "report": None,
        }

        final_state = self.workflow.invoke(initial_state)
        self._display_results(final_state["report"])

        return ExperimentOutcome(
            report=final_state["report"],
            forecasts=final_state["forecasts"],
            models=final_state["models"],
            loss_histories=final_state["histories"],
        )

    def _display_results(self, report) -> None:
        _banner("🎯 FINAL RESULTS")
        for entry in report.runs:
            if entry.failed:
                logger.info(f"  {entry.run:<26} FAILED ({entry.error})")
            else:
                rmse = entry.summary.test_rmse_mpa
                logger.info(f"  {entry.run:<26} test RMSE = {rmse:.3f} MPa" if rmse is not None else f"  {entry.run}")
        logger.info(f"  TR-LSTM < baseline LSTM: {report.tr_beats_baseline}")
        logger.info(f"  baseline LSTM < DNN:     {report.baseline_beats_dnn}")
