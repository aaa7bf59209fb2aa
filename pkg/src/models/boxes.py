"""Conjuntos de cajas normalizadas para detección."""

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

Box = Tuple[float, float, float, float]


class BoxSet(BaseModel):
    """Cajas (x_min, y_min, x_max, y_max) en [0, 1] con clase y puntuación opcional."""

    boxes: List[Box] = Field(default_factory=list)
    classes: List[int] = Field(default_factory=list)
    scores: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_boxes(self) -> "BoxSet":
        """Verifica el orden de las esquinas, el rango y las longitudes."""
        if len(self.classes) != len(self.boxes):
            raise ValueError("boxes y classes deben tener la misma longitud")
        if self.scores is not None and len(self.scores) != len(self.boxes):
            raise ValueError("scores debe tener la misma longitud que boxes")
        for x0, y0, x1, y1 in self.boxes:
            if not (0.0 <= x0 <= x1 <= 1.0 and 0.0 <= y0 <= y1 <= 1.0):
                raise ValueError(f"caja inválida: {(x0, y0, x1, y1)}")
        return self

    def __len__(self) -> int:
        return len(self.boxes)

    def to_array(self) -> np.ndarray:
        """Cajas como arreglo (n, 4) float64."""
        return np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)

    def flipped(self) -> "BoxSet":
        """Reflejo horizontal de todas las cajas."""
        boxes = [(1.0 - x1, y0, 1.0 - x0, y1) for x0, y0, x1, y1 in self.boxes]
        return BoxSet(boxes=boxes, classes=list(self.classes), scores=self.scores)
