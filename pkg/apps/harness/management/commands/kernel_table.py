from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from apps.harness.scenarios import EXIT_CONFIG
from apps.kernels.kernel import build_kernel, kernel_constants
from apps.services.exceptions import ZenerBeamError
from apps.services.utils import run_slug, solver_setting


class Command(BaseCommand):
    help = "Таблица ядра l_alpha на сетке (t, l_alpha) и константы оператора L"

    def add_arguments(self, parser):
        parser.add_argument("alpha", type=float)
        parser.add_argument("theta", type=float)
        parser.add_argument("T", type=float)
        parser.add_argument("dt", type=float)
        parser.add_argument("--out", help="Каталог результатов")

    def handle(self, *args, **options):
        try:
            kernel = build_kernel(options["alpha"], options["theta"], options["T"], options["dt"])
        except ZenerBeamError as exc:
            raise CommandError(f"configuration error: {exc}", returncode=EXIT_CONFIG)
        directory = Path(options["out"] or solver_setting("OUTPUT_DIR"))
        name = run_slug("kernel", alpha=kernel.alpha, theta=kernel.theta, T=kernel.horizon, n=kernel.steps)
        path = kernel.to_csv(directory / f"{name}.csv")
        values = kernel_constants(kernel)
        self.stdout.write(
            f"L1 norm {values.l1_norm:.17g}, Young bound {values.young:.17g}, "
            f"printed bound {values.printed:.17g}"
        )
        self.stdout.write(self.style.SUCCESS(f"Таблица записана в {path}"))
