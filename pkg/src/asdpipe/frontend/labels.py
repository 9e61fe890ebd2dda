from __future__ import annotations

import numpy as np

from ..exceptions import ValidationError

MISSING_POLICIES = ("noattr", "ignore")


class MetaLabelEncoder:
    """Maps clips to meta-information classes.

    The class key joins machine type, section and the sorted ``key=value``
    attribute string. Clips without attributes get ``"noattr"`` under the
    default policy; ``missing="ignore"`` drops the attribute part for them.
    The domain is not part of the key.
    """

    def __init__(self, missing="noattr"):
        if missing not in MISSING_POLICIES:
            raise ValidationError(f"missing-attribute policy must be one of {MISSING_POLICIES}")
        self.missing = missing

    def key(self, record) -> str:
        attrs = dict(record.attributes) if not isinstance(record, dict) else dict(record.get("attributes", {}))
        mt = record["machine_type"] if isinstance(record, dict) else record.machine_type
        sec = record["section"] if isinstance(record, dict) else record.section
        if attrs:
            attr = ",".join(f"{k}={v}" for k, v in sorted(attrs.items()))
        elif self.missing == "noattr":
            attr = "noattr"
        else:
            return f"{mt}|{sec}"
        return f"{mt}|{sec}|{attr}"

    def fit(self, records):
        self.classes_ = sorted({self.key(r) for r in records})
        self._index = {k: i for i, k in enumerate(self.classes_)}
        return self

    def transform(self, records) -> np.ndarray:
        try:
            return np.array([self._index[self.key(r)] for r in records], dtype=np.int64)
        except KeyError as exc:
            raise ValidationError(f"unseen meta label {exc.args[0]!r}") from None

    def fit_transform(self, records):
        return self.fit(records).transform(records)
