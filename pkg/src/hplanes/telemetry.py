import importlib
import logging
import os
import threading
import typing as t

from hplanes.runtime_state import runtime_state

_logger = logging.getLogger(__name__)
_TRUTHY_ENV_VALUES = {'1', 'true', 'yes', 'on'}


def _is_truthy_env_var(name: str, *, default: bool) -> bool:
    raw_value = os.environ.get(name)
    if raw_value is None:
        return default
    return raw_value.strip().lower() in _TRUTHY_ENV_VALUES


class TelemetryMetrics:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._initialized = False
        self._metrics_api: t.Any | None = None
        self._solve_started_counter: t.Any | None = None
        self._solve_completed_counter: t.Any | None = None
        self._solve_duration_histogram: t.Any | None = None
        self._solver_iterations_histogram: t.Any | None = None
        self._check_counter: t.Any | None = None
        self._stage_completed_counter: t.Any | None = None

    def _import_module(self, name: str) -> t.Any:
        return importlib.import_module(name)

    def _load_otel_modules(self) -> dict[str, t.Any] | None:
        try:
            metrics_api = self._import_module('opentelemetry.metrics')
        except ModuleNotFoundError:
            return None

        modules: dict[str, t.Any] = {'metrics_api': metrics_api}
        for module_name in (
            'opentelemetry.sdk.metrics',
            'opentelemetry.sdk.metrics.export',
            'opentelemetry.exporter.otlp.proto.http.metric_exporter',
        ):
            try:
                modules[module_name] = self._import_module(module_name)
            except ModuleNotFoundError:
                pass

        return modules

    def _configure_otlp_metrics_export(self, modules: dict[str, t.Any]) -> None:
        otlp_endpoint = os.environ.get('OTEL_EXPORTER_OTLP_METRICS_ENDPOINT') or os.environ.get(
            'OTEL_EXPORTER_OTLP_ENDPOINT'
        )
        if not otlp_endpoint:
            return

        sdk_metrics = modules.get('opentelemetry.sdk.metrics')
        sdk_export = modules.get('opentelemetry.sdk.metrics.export')
        otlp_exporter_module = modules.get('opentelemetry.exporter.otlp.proto.http.metric_exporter')
        if not sdk_metrics or not sdk_export or not otlp_exporter_module:
            _logger.warning(
                'OTLP endpoint configured but OpenTelemetry SDK/exporter packages are missing'
            )
            return

        export_interval_ms = 60000
        raw_export_interval = os.environ.get('HPLANES_OTEL_EXPORT_INTERVAL_MS')
        if raw_export_interval:
            try:
                parsed_export_interval = int(raw_export_interval)
                if parsed_export_interval > 0:
                    export_interval_ms = parsed_export_interval
            except ValueError:
                _logger.warning(
                    'Invalid HPLANES_OTEL_EXPORT_INTERVAL_MS=%s, using default',
                    raw_export_interval,
                )

        exporter = otlp_exporter_module.OTLPMetricExporter()
        reader = sdk_export.PeriodicExportingMetricReader(
            exporter,
            export_interval_millis=export_interval_ms,
        )
        provider = sdk_metrics.MeterProvider(metric_readers=[reader])
        modules['metrics_api'].set_meter_provider(provider)
        _logger.info('Configured OpenTelemetry OTLP metrics export to %s', otlp_endpoint)

    def _observe_stage(self, _options: t.Any) -> list[t.Any]:
        metrics_api = self._metrics_api
        if metrics_api is None:
            return []

        snapshot = runtime_state.snapshot()
        stage = snapshot.get('stage')
        return [
            metrics_api.Observation(
                -1 if stage is None else stage,
                {'command': snapshot.get('command') or 'none'},
            )
        ]

    def initialize(self) -> None:
        with self._lock:
            if self._initialized:
                return
            self._initialized = True

        modules = self._load_otel_modules()
        if modules is None:
            _logger.info(
                'OpenTelemetry metrics are disabled because opentelemetry is not installed'
            )
            return

        if _is_truthy_env_var('HPLANES_OTEL_CONFIGURE_PROVIDER', default=True):
            self._configure_otlp_metrics_export(modules)

        metrics_api = modules['metrics_api']
        self._metrics_api = metrics_api
        meter = metrics_api.get_meter('hplanes', version='1.0.0')
        self._solve_started_counter = meter.create_counter(
            'hplanes.solves.started',
            unit='{solve}',
            description='Number of Plateau solves started',
        )
        self._solve_completed_counter = meter.create_counter(
            'hplanes.solves.completed',
            unit='{solve}',
            description='Number of Plateau solves that returned or failed',
        )
        self._solve_duration_histogram = meter.create_histogram(
            'hplanes.solves.duration',
            unit='s',
            description='Wall time of a single solve',
        )
        self._solver_iterations_histogram = meter.create_histogram(
            'hplanes.solver.iterations',
            unit='{iteration}',
            description='Descent iterations per solve',
        )
        self._check_counter = meter.create_counter(
            'hplanes.checks',
            unit='{check}',
            description='Verification checks by name and result',
        )
        self._stage_completed_counter = meter.create_counter(
            'hplanes.stages.completed',
            unit='{stage}',
            description='Exhaustion stages completed',
        )
        meter.create_observable_gauge(
            'hplanes.run.stage',
            callbacks=[self._observe_stage],
            description='Current exhaustion stage (-1 outside a stage)',
            unit='{stage}',
        )

    def record_solve_started(self, topology: str) -> None:
        self.initialize()
        if self._solve_started_counter is None:
            return
        self._solve_started_counter.add(1, attributes={'topology': topology})

    def record_solve_completed(
        self,
        topology: str,
        outcome: str,
        duration_seconds: float | None = None,
        iterations: int | None = None,
    ) -> None:
        self.initialize()
        attributes = {'topology': topology, 'outcome': outcome}
        if self._solve_completed_counter is not None:
            self._solve_completed_counter.add(1, attributes=attributes)
        if self._solve_duration_histogram is not None and duration_seconds is not None:
            self._solve_duration_histogram.record(duration_seconds, attributes=attributes)
        if self._solver_iterations_histogram is not None and iterations is not None:
            self._solver_iterations_histogram.record(iterations, attributes=attributes)

    def record_check(self, check: str, *, passed: bool) -> None:
        self.initialize()
        if self._check_counter is None:
            return
        self._check_counter.add(
            1,
            attributes={'check': check, 'result': 'pass' if passed else 'fail'},
        )

    def record_stage_completed(self, command: str, *, ok: bool) -> None:
        self.initialize()
        if self._stage_completed_counter is None:
            return
        self._stage_completed_counter.add(
            1,
            attributes={'command': command, 'result': 'ok' if ok else 'error'},
        )


telemetry = TelemetryMetrics()
