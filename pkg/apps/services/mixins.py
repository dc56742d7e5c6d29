import csv
from pathlib import Path

from apps.services.utils import format_float


class CsvExportMixin:
    """
    Выгрузка табличных данных объекта в CSV.

    Наследник определяет csv_header и метод csv_rows(), возвращающий
    строки из чисел; форматирование чисел единое для всего проекта.
    """

    csv_header: tuple = ()

    def csv_rows(self):
        raise NotImplementedError

    def to_csv(self, path, stride: int = 1) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(self.csv_header)
            for index, row in enumerate(self.csv_rows()):
                if index % stride:
                    continue
                writer.writerow([format_float(value) for value in row])
        return path
