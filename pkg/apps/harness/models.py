from django.db import models


class RunRecord(models.Model):
    """
    Журнал запусков расчётных сценариев
    """

    MODE_OPTIONS = (
        ("direct", "Прямой расчёт"),
        ("picard", "Итерации Пикара"),
        ("compare", "Сравнение режимов"),
    )

    scenario = models.CharField(verbose_name="Сценарий", max_length=50)
    slug = models.SlugField(verbose_name="Каталог запуска", max_length=255)
    digest = models.CharField(verbose_name="Хэш конфигурации", max_length=64, blank=True)
    mode = models.CharField(
        verbose_name="Режим", choices=MODE_OPTIONS, default="direct", max_length=10
    )
    eps = models.FloatField(verbose_name="Параметр ε", null=True, blank=True)
    verdict = models.BooleanField(verbose_name="Оценка выполнена", null=True, blank=True)
    worst_margin = models.FloatField(verbose_name="Наименьший запас", null=True, blank=True)
    exit_code = models.PositiveSmallIntegerField(verbose_name="Код завершения", default=0)
    output_dir = models.CharField(verbose_name="Каталог результатов", max_length=500)
    time_create = models.DateTimeField(verbose_name="Время запуска", auto_now_add=True)

    class Meta:
        ordering = ("-time_create",)
        indexes = [
            models.Index(fields=["-time_create", "scenario"], name="harness_run_time_scenario_idx")
        ]
        verbose_name = "Запуск"
        verbose_name_plural = "Запуски"

    def __str__(self):
        return f"{self.scenario}:{self.slug} ({self.exit_code})"
