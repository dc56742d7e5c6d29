# Generated by Django 5.1.1 on 2026-10-18 10:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="RunRecord",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("scenario", models.CharField(max_length=50, verbose_name="Сценарий")),
                (
                    "slug",
                    models.SlugField(max_length=255, verbose_name="Каталог запуска"),
                ),
                (
                    "digest",
                    models.CharField(
                        blank=True, max_length=64, verbose_name="Хэш конфигурации"
                    ),
                ),
                (
                    "mode",
                    models.CharField(
                        choices=[("direct", "Прямой расчёт"), ("picard", "Итерации Пикара")],
                        default="direct",
                        max_length=10,
                        verbose_name="Режим",
                    ),
                ),
                (
                    "verdict",
                    models.BooleanField(
                        blank=True, null=True, verbose_name="Оценка выполнена"
                    ),
                ),
                (
                    "worst_margin",
                    models.FloatField(
                        blank=True, null=True, verbose_name="Наименьший запас"
                    ),
                ),
                (
                    "exit_code",
                    models.PositiveSmallIntegerField(
                        default=0, verbose_name="Код завершения"
                    ),
                ),
                (
                    "output_dir",
                    models.CharField(max_length=500, verbose_name="Каталог результатов"),
                ),
                (
                    "time_create",
                    models.DateTimeField(
                        auto_now_add=True, verbose_name="Время запуска"
                    ),
                ),
            ],
            options={
                "verbose_name": "Запуск",
                "verbose_name_plural": "Запуски",
                "ordering": ("-time_create",),
                "indexes": [
                    models.Index(
                        fields=["-time_create", "scenario"],
                        name="harness_run_time_scenario_idx",
                    )
                ],
            },
        ),
    ]
