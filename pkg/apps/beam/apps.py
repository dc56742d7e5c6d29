from django.apps import AppConfig


class BeamConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.beam"
    verbose_name = "Конечные элементы балки"
