"""
Mixture Serialization Record

Versioned, self-describing JSON form of a variational mixture. Means are
stored in the flattened layout (A column-major, then W row-major), so a
record is portable across implementations. Floats round-trip exactly.
"""

from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field

LAYOUT_TAG = "A_col_major_W_row_major"


class ComponentRecord(BaseModel):
    """One isotropic Gaussian component."""

    model_config = ConfigDict(from_attributes=True)

    weight: float = Field(ge=0, le=1, description="Mixture weight")
    sigma2: float = Field(gt=0, description="Isotropic variance")
    mu: List[float] = Field(description="Flattened mean vector of length R(D+N)")


class MixtureRecord(BaseModel):
    model_config = ConfigDict(from_attributes=True, ser_json_inf_nan="constants")

    format_version: Literal[1] = 1
    layout: Literal["A_col_major_W_row_major"] = LAYOUT_TAG
    D: int = Field(ge=1)
    N: int = Field(ge=1)
    R: int = Field(ge=1)
    likelihood: Literal["gaussian", "uniform"]
    elbo: float = Field(description="Approximate ELBO of the mixture at write time")
    components: List[ComponentRecord]
