"""
行模型驱动的 CSV 输出（pandas，17 位有效数字，LF 换行）。
"""
import logging
from pathlib import Path
from typing import Iterable, List, Type, Union

import pandas as pd
from pydantic import BaseModel, create_model

from src import ENV
from src.core.errors import UsageError

logger = logging.getLogger(__name__)


class EdgeRow(BaseModel):
    u: int
    v: int
    orbit: int


class VariationRow(BaseModel):
    kind: str
    p: float
    level: int
    r_or_t: float
    raw: float
    normalized: float


class MaximalRow(BaseModel):
    vertex_id: int
    g: float


class EigenRow(BaseModel):
    j: int
    eigenvalue: float


class HeatKernelRow(BaseModel):
    x_id: int
    y_id: int
    p_t: float


def vertex_row_model(dim: int) -> Type[BaseModel]:
    fields = {"vertex_id": (int, ...)}
    fields.update({f"x{k}": (float, ...) for k in range(dim)})
    fields["weight"] = (float, ...)
    return create_model(f"Vertex{dim}DRow", **fields)


Rows = Union[pd.DataFrame, Iterable[Union[BaseModel, dict]]]


class TableWriter:
    def __init__(self, row_model: Type[BaseModel]):
        self.row_model = row_model
        self.headers = list(row_model.model_fields.keys())

    def frame(self, rows: Rows) -> pd.DataFrame:
        """按行模型校验并固定列顺序"""
        if isinstance(rows, pd.DataFrame):
            missing = [h for h in self.headers if h not in rows.columns]
            if missing:
                raise UsageError(f"{self.row_model.__name__} 缺少列: {missing}")
            return rows[self.headers].reset_index(drop=True)
        records: List[dict] = []
        for row in rows:
            data = row.model_dump() if isinstance(row, BaseModel) else row
            records.append(self.row_model(**{h: data.get(h) for h in self.headers}).model_dump())
        return pd.DataFrame(records, columns=self.headers)

    def to_csv(self, rows: Rows) -> str:
        return self.frame(rows).to_csv(index=False, float_format=ENV.csv_float_format, lineterminator="\n")

    def write_csv(self, rows: Rows, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.to_csv(rows))
        logger.debug("写出 %s", path)
        return path
