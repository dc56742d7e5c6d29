from django import forms

from apps.kernels.mollifiers import GAMMA_RULES

SCENARIOS = (
    ("free_vibration", "Свободные колебания"),
    ("stepped_stiffness", "Ступенчатая жёсткость"),
    ("axial_impulse", "Импульс продольной силы"),
    ("moving_load", "Подвижная нагрузка"),
    ("eps_sweep", "Серия по ε"),
    ("picard", "Итерации Пикара"),
)
MODES = (("direct", "Прямой расчёт"), ("picard", "Итерации Пикара"))
RULES = tuple((rule, rule) for rule in GAMMA_RULES)


class FloatListField(forms.Field):
    """
    Список чисел из TOML-массива
    """

    def to_python(self, value):
        if value in self.empty_values:
            return []
        if not isinstance(value, (list, tuple)):
            raise forms.ValidationError("expected a list of numbers", code="invalid")
        try:
            return [float(item) for item in value]
        except (TypeError, ValueError):
            raise forms.ValidationError("expected a list of numbers", code="invalid")


class TableForm(forms.Form):
    """
    Форма одной таблицы конфигурации запуска.

    Значения initial полей подставляются, если ключ не задан в файле;
    defaults позволяет сценарию переопределить их до пользовательских.
    """

    def __init__(self, data=None, defaults=None):
        merged = {
            name: field.initial
            for name, field in self.base_fields.items()
            if field.initial is not None
        }
        merged.update(defaults or {})
        merged.update(data or {})
        super().__init__(merged)


class ScenarioForm(TableForm):
    name = forms.ChoiceField(choices=SCENARIOS)
    amplitude = forms.FloatField(initial=1e-2)
    speeds = FloatListField(required=False)

    def clean_speeds(self):
        speeds = self.cleaned_data["speeds"]
        if any(speed <= 0.0 for speed in speeds):
            raise forms.ValidationError("speeds must be positive")
        return speeds


class MaterialForm(TableForm):
    EI1 = forms.FloatField(initial=1.0)
    EI2 = forms.FloatField(initial=0.0)
    x0 = forms.FloatField(initial=0.5)
    P0 = forms.FloatField(initial=0.0)
    P1 = forms.FloatField(initial=0.0)
    t1 = forms.FloatField(initial=0.5)
    H0 = forms.FloatField(initial=0.0)
    speed = forms.FloatField(initial=1.0)
    density_enabled = forms.BooleanField(initial=False, required=False)
    R0 = forms.FloatField(initial=1.0)
    R1R2gap = forms.FloatField(initial=0.0)


class InitialForm(TableForm):
    """
    Начальные данные f1 = amplitude·s(x)·ε^{-eps_power}, f2 = velocity·s(x)·ε^{-eps_power},
    s(x) = x²(1-x)²; amplitude задаётся в [scenario]
    """

    velocity = forms.FloatField(initial=0.0)
    eps_power = forms.FloatField(initial=0.0)

    def clean_eps_power(self):
        power = self.cleaned_data["eps_power"]
        if power < 0.0:
            raise forms.ValidationError("eps_power must be non-negative")
        return power


class KernelForm(TableForm):
    alpha = forms.FloatField()
    theta = forms.FloatField()
    foundation = forms.BooleanField(initial=True, required=False)
    mollified = forms.BooleanField(initial=False, required=False)

    def clean_alpha(self):
        alpha = self.cleaned_data["alpha"]
        if not 0.0 < alpha < 1.0:
            raise forms.ValidationError("alpha must lie in (0,1)")
        return alpha

    def clean_theta(self):
        theta = self.cleaned_data["theta"]
        if not 0.0 < theta <= 1.0:
            raise forms.ValidationError("theta must lie in (0,1]")
        return theta


class TimeForm(TableForm):
    T = forms.FloatField(initial=1.0)
    dt = forms.FloatField(required=False)

    def clean_T(self):
        horizon = self.cleaned_data["T"]
        if horizon <= 0.0:
            raise forms.ValidationError("T must be positive")
        return horizon

    def clean(self):
        cleaned_data = super().clean()
        horizon, dt = cleaned_data.get("T"), cleaned_data.get("dt")
        if horizon is None:
            return cleaned_data
        if dt is None:
            cleaned_data["dt"] = horizon / 2048
        elif not 0.0 < dt < horizon:
            self.add_error("dt", "dt must lie in (0, T)")
        return cleaned_data


class MeshForm(TableForm):
    n_elems = forms.IntegerField(initial=64, min_value=2)


class RegularizationForm(TableForm):
    eps = FloatListField(required=False)
    stiffness_rule = forms.ChoiceField(choices=RULES, initial="power")
    stiffness_exponent = forms.FloatField(initial=0.5)
    axial_rule = forms.ChoiceField(choices=RULES, initial="log")
    axial_exponent = forms.FloatField(initial=1.0)
    load_rule = forms.ChoiceField(choices=RULES, initial="power")
    load_exponent = forms.FloatField(initial=0.5)
    kernel_rule = forms.ChoiceField(choices=RULES, initial="log")
    kernel_exponent = forms.FloatField(initial=1.0)

    def clean_eps(self):
        eps = self.cleaned_data["eps"]
        if any(not 0.0 < value <= 1.0 for value in eps):
            raise forms.ValidationError("eps values must lie in (0,1]")
        if len(set(eps)) != len(eps):
            raise forms.ValidationError("eps values must be distinct")
        return sorted(eps, reverse=True)


class SolverForm(TableForm):
    mode = forms.ChoiceField(choices=MODES, initial="direct")
    tol = forms.FloatField(initial=1e-8)
    max_iter = forms.IntegerField(initial=50, min_value=1)
    restart = forms.BooleanField(initial=True, required=False)

    def clean_tol(self):
        tol = self.cleaned_data["tol"]
        if tol <= 0.0:
            raise forms.ValidationError("tol must be positive")
        return tol


class OutputForm(TableForm):
    directory = forms.CharField(required=False)
    stride = forms.IntegerField(initial=1, min_value=1)
    snapshots = forms.BooleanField(initial=False, required=False)


TABLE_FORMS = {
    "scenario": ScenarioForm,
    "material": MaterialForm,
    "initial": InitialForm,
    "kernel": KernelForm,
    "time": TimeForm,
    "mesh": MeshForm,
    "regularization": RegularizationForm,
    "solver": SolverForm,
    "output": OutputForm,
}
