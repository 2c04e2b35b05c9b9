import json
import logging
import datetime
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, TypedDict, Union

import appdirs

from .config import ENV_HOME, AggMode, Instantiation, InstantiationConfig
from .exceptions import DecodeError, InvalidConfigError
from .keychain import KeyState
from .ootable import OOTable, deserialize_table, serialize_table

logger = logging.getLogger(__name__)

SENDER_KEY_FILE = "sender.gks"
VERIFIER_KEY_FILE = "verifier.gks"
CONFIG_FILE = "config.json"


class ConfigDict(TypedDict):
    """Stored form of an InstantiationConfig plus a creation timestamp."""
    instantiation: str
    n: int
    kappa: int
    b_enc_oo: bool
    b_mac_oo: bool
    b_agg: int
    max_msg_len: int
    poly_per_index_r: bool
    timestamp: str


def default_home() -> Path:
    override = os.environ.get(ENV_HOME)
    return Path(override) if override else Path(appdirs.user_data_dir("graphene_faae"))


def config_to_dict(config: InstantiationConfig) -> ConfigDict:
    return {
        "instantiation": config.instantiation.label,
        "n": config.n,
        "kappa": config.kappa,
        "b_enc_oo": config.b_enc_oo,
        "b_mac_oo": config.b_mac_oo,
        "b_agg": int(config.b_agg),
        "max_msg_len": config.max_msg_len,
        "poly_per_index_r": config.poly_per_index_r,
        "timestamp": datetime.datetime.now().isoformat(),
    }


def config_from_dict(data: Union[Dict[str, Any], ConfigDict]) -> InstantiationConfig:
    return InstantiationConfig(
        instantiation=Instantiation.parse(data["instantiation"]),
        n=data["n"],
        kappa=data["kappa"],
        b_enc_oo=data["b_enc_oo"],
        b_mac_oo=data["b_mac_oo"],
        b_agg=AggMode(data["b_agg"]),
        max_msg_len=data["max_msg_len"],
        poly_per_index_r=data.get("poly_per_index_r", False),
    )


class KeyStore:
    """Key records, the instantiation config and precomputed tables on disk."""

    def __init__(self, home: Optional[Path] = None):
        self.app_dir = Path(home) if home is not None else default_home()
        self.config_file = self.app_dir / CONFIG_FILE
        self._ensure_directory()

    def _ensure_directory(self):
        """Create storage directory if it doesn't exist."""
        self.app_dir.mkdir(parents=True, exist_ok=True)

    def _validate_config_dict(self, data: Union[Dict[str, Any], ConfigDict]) -> bool:
        """Check that a stored config has every field with the right type.

        Args:
            data: Dictionary loaded from the config file

        Returns:
            bool: True if all required fields are present and well typed
        """
        expected = {
            "instantiation": str, "n": int, "kappa": int, "b_enc_oo": bool,
            "b_mac_oo": bool, "b_agg": int, "max_msg_len": int,
        }
        return all(isinstance(data.get(name), kind) for name, kind in expected.items())

    def key_path(self, role: str) -> Path:
        return self.app_dir / (SENDER_KEY_FILE if role == "sender" else VERIFIER_KEY_FILE)

    def save_keys(self, sender: KeyState, verifier: KeyState, config: InstantiationConfig) -> None:
        """Write both key records and the config they belong to.

        Both parties start from the same pre-shared root, so the two records
        are identical at keygen time.
        """
        for role, state in (("sender", sender), ("verifier", verifier)):
            path = self.key_path(role)
            path.write_bytes(state.to_record())
            os.chmod(path, 0o600)
        with self.config_file.open("w") as f:
            json.dump(config_to_dict(config), f, indent=2)
        logger.info(f"Saved key records and config to {self.app_dir}")

    def load_key(self, role: str) -> KeyState:
        path = self.key_path(role)
        return KeyState.from_record(path.read_bytes())

    def save_key(self, role: str, state: KeyState) -> None:
        self.key_path(role).write_bytes(state.to_record())

    def load_config(self) -> InstantiationConfig:
        """Load the stored config.

        Returns:
            The InstantiationConfig written by save_keys
        """
        with self.config_file.open("r") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise DecodeError(f"config file is not valid JSON: {e}") from e
        if not isinstance(data, dict) or not self._validate_config_dict(data):
            logger.error("Invalid config data in storage")
            raise InvalidConfigError(f"malformed config in {self.config_file}")
        return config_from_dict(data)

    def table_path(self, start_index: int) -> Path:
        return self.app_dir / f"window_{start_index}.got"

    def save_table(self, table: OOTable) -> Path:
        path = self.table_path(table.start_index)
        path.write_bytes(serialize_table(table))
        os.chmod(path, 0o600)
        return path

    def load_table(self, start_index: int) -> OOTable:
        return deserialize_table(self.table_path(start_index).read_bytes())

    def load_tables(self) -> List[OOTable]:
        """Every stored window table, in window order."""
        starts = []
        for path in self.app_dir.glob("window_*.got"):
            try:
                starts.append(int(path.stem[len("window_"):]))
            except ValueError:
                logger.warning(f"Ignoring stray table file {path.name}")
        tables = [self.load_table(start) for start in sorted(starts)]
        if tables:
            logger.info(f"Loaded {len(tables)} precomputed tables from {self.app_dir}")
        return tables

    def sync_tables(self, tables: List[OOTable]) -> None:
        """Delete fully consumed tables and rewrite partly consumed ones."""
        for table in tables:
            if table.live_bytes() == 0:
                self.table_path(table.start_index).unlink(missing_ok=True)
            else:
                self.save_table(table)
