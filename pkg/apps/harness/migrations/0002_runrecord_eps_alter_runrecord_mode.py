# Generated by Django 5.1.1 on 2026-10-18 14:40

from django.db import migrations, models


class Migration(migrations.Migration):

    dependencies = [
        ("harness", "0001_initial"),
    ]

    operations = [
        migrations.AddField(
            model_name="runrecord",
            name="eps",
            field=models.FloatField(blank=True, null=True, verbose_name="Параметр ε"),
        ),
        migrations.AlterField(
            model_name="runrecord",
            name="mode",
            field=models.CharField(
                choices=[
                    ("direct", "Прямой расчёт"),
                    ("picard", "Итерации Пикара"),
                    ("compare", "Сравнение режимов"),
                ],
                default="direct",
                max_length=10,
                verbose_name="Режим",
            ),
        ),
    ]
