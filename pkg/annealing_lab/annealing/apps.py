from django.apps import AppConfig


class AnnealingConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "annealing"
    verbose_name = "Annealing lab"
