"""
Instantiation configuration: the (kappa, n, OO flags, aggregation mode, batch
verification) tuple that selects primitives and processing paths.
"""

import enum
import logging
import os
from dataclasses import dataclass, replace
from typing import Optional

from .exceptions import InvalidConfigError

logger = logging.getLogger(__name__)

ENV_ALLOW_SNAPSHOT = "GRAPHENE_ALLOW_SNAPSHOT"
ENV_HOME = "GRAPHENE_HOME"
ENV_LOG_LEVEL = "GRAPHENE_LOG_LEVEL"

# Counter-mode keystreams beyond 2^32 blocks would wrap GCM's 32-bit counter.
MAX_MSG_LEN_LIMIT = 1 << 30


class Instantiation(enum.IntEnum):
    """Wire identifiers of the three instantiations."""

    STD_FAAE = 1
    GRAPHENE_AE = 2
    GRAPHENE_POLY = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "Instantiation":
        aliases = {
            "std": cls.STD_FAAE, "std_faae": cls.STD_FAAE, "faae": cls.STD_FAAE,
            "ae": cls.GRAPHENE_AE, "graphene_ae": cls.GRAPHENE_AE,
            "poly": cls.GRAPHENE_POLY, "graphene_poly": cls.GRAPHENE_POLY,
        }
        try:
            return aliases[text.strip().lower().replace("-", "_")]
        except KeyError:
            raise InvalidConfigError(f"unknown instantiation {text!r}") from None


class AggMode(enum.IntEnum):
    """Aggregation modes: hash chain, XOR, addition modulo 2^130 - 5."""

    HASH = 1
    XOR = 2
    ADD_Q = 3

    @classmethod
    def parse(cls, text: str) -> "AggMode":
        text = text.strip().lower()
        if text.isdigit():
            try:
                return cls(int(text))
            except ValueError:
                raise InvalidConfigError(f"unknown aggregation mode {text}") from None
        try:
            return cls[text.upper()]
        except KeyError:
            raise InvalidConfigError(f"unknown aggregation mode {text!r}") from None


DEFAULT_AGG_MODE = {
    Instantiation.STD_FAAE: AggMode.HASH,
    Instantiation.GRAPHENE_AE: AggMode.HASH,
    Instantiation.GRAPHENE_POLY: AggMode.XOR,
}


@dataclass(frozen=True)
class InstantiationConfig:
    instantiation: Instantiation
    n: int
    kappa: int = 128
    b_enc_oo: bool = False
    b_mac_oo: bool = False
    b_agg: AggMode = AggMode.HASH
    b_bver: bool = False
    max_msg_len: int = 16
    poly_per_index_r: bool = False

    def __post_init__(self):
        # Accept plain ints from callers and records.
        try:
            object.__setattr__(self, "instantiation", Instantiation(self.instantiation))
        except ValueError:
            raise InvalidConfigError(f"unknown instantiation {self.instantiation}") from None
        try:
            object.__setattr__(self, "b_agg", AggMode(self.b_agg))
        except ValueError:
            raise InvalidConfigError(f"aggregation mode must be 1, 2 or 3, got {self.b_agg}") from None
        self.validate()

    def validate(self) -> None:
        if self.n < 1:
            raise InvalidConfigError(f"batch size n must be at least 1, got {self.n}")
        if self.n > 0xFFFFFFFF:
            raise InvalidConfigError("batch size n must fit in 32 bits")
        if self.kappa not in (128, 256):
            raise InvalidConfigError(f"kappa must be 128 or 256, got {self.kappa}")
        if not 1 <= self.max_msg_len <= MAX_MSG_LEN_LIMIT:
            raise InvalidConfigError(f"max_msg_len must be in [1, {MAX_MSG_LEN_LIMIT}]")
        if self.b_bver:
            raise InvalidConfigError("batch verification is not supported; use recompute-and-aggregate")
        if self.b_enc_oo != self.b_mac_oo:
            raise InvalidConfigError("b_enc_oo and b_mac_oo must be set together")
        if self.instantiation is Instantiation.STD_FAAE and (self.b_enc_oo or self.b_mac_oo):
            raise InvalidConfigError("Std FAAE has no universal MAC and cannot run offline-online")
        if self.poly_per_index_r and self.instantiation is not Instantiation.GRAPHENE_POLY:
            raise InvalidConfigError("poly_per_index_r only applies to Graphene-Poly")
        if (self.instantiation is Instantiation.GRAPHENE_POLY and self.b_agg is AggMode.ADD_Q
                and not self.poly_per_index_r):
            # a shared r makes the modular sum of tags independent of which s_j meets which c_j
            raise InvalidConfigError("add_q aggregation with Graphene-Poly needs poly_per_index_r")

    @property
    def oo(self) -> bool:
        return self.b_enc_oo and self.b_mac_oo

    @property
    def key_bytes(self) -> int:
        return self.kappa // 8

    @classmethod
    def preset(
        cls,
        instantiation: Instantiation,
        n: int,
        kappa: int = 128,
        max_msg_len: int = 16,
        agg: Optional[AggMode] = None,
        oo: Optional[bool] = None,
    ) -> "InstantiationConfig":
        """Default bindings of an instantiation, with optional overrides.

        Graphene-Poly under add_q aggregation gets a per-index Poly1305 r.
        """
        instantiation = Instantiation(instantiation)
        if oo is None:
            oo = instantiation is not Instantiation.STD_FAAE
        b_agg = AggMode(agg) if agg is not None else DEFAULT_AGG_MODE[instantiation]
        return cls(
            instantiation=instantiation,
            n=n,
            kappa=kappa,
            b_enc_oo=oo,
            b_mac_oo=oo,
            b_agg=b_agg,
            max_msg_len=max_msg_len,
            poly_per_index_r=instantiation is Instantiation.GRAPHENE_POLY and b_agg is AggMode.ADD_Q,
        )

    def direct(self) -> "InstantiationConfig":
        """Same instantiation with both OO flags cleared."""
        return replace(self, b_enc_oo=False, b_mac_oo=False)


def snapshot_allowed() -> bool:
    return os.environ.get(ENV_ALLOW_SNAPSHOT, "") == "1"
