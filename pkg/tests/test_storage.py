import json
import os
import stat
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from graphene_faae import keychain, ootable
from graphene_faae.config import ENV_HOME, AggMode, Instantiation, InstantiationConfig
from graphene_faae.exceptions import DecodeError, InvalidConfigError
from graphene_faae.storage import KeyStore, config_from_dict, config_to_dict, default_home


class TestKeyStore(unittest.TestCase):
    def setUp(self):
        """Set up a key store in a temporary directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.home = Path(self.tmp.name) / "store"
        self.store = KeyStore(self.home)
        self.config = InstantiationConfig.preset(Instantiation.GRAPHENE_AE, n=16, max_msg_len=32, agg=AggMode.ADD_Q)
        self.root = keychain.kg(self.config, seed=b"store")

    def tearDown(self):
        self.tmp.cleanup()

    def test_directory_created(self):
        """Test that the store directory is created on demand."""
        self.assertTrue(self.home.is_dir())

    def test_save_and_load_keys(self):
        """Test identical sender and verifier records plus the config sidecar."""
        self.store.save_keys(self.root, self.root.copy(), self.config)
        sender = self.store.key_path("sender").read_bytes()
        verifier = self.store.key_path("verifier").read_bytes()
        self.assertEqual(sender, verifier)
        self.assertEqual(len(sender), 45)
        self.assertEqual(self.store.load_key("sender").to_record(), self.root.to_record())
        self.assertEqual(self.store.load_config(), self.config)

    def test_key_files_are_private(self):
        """Test owner-only permissions on key records."""
        self.store.save_keys(self.root, self.root.copy(), self.config)
        mode = stat.S_IMODE(os.stat(self.store.key_path("sender")).st_mode)
        self.assertEqual(mode, 0o600)

    def test_save_key_overwrites(self):
        """Test persisting an advanced chain."""
        self.store.save_keys(self.root, self.root.copy(), self.config)
        keychain.advance(self.root, 16)
        self.store.save_key("verifier", self.root)
        self.assertEqual(self.store.load_key("verifier").index, 17)
        self.assertEqual(self.store.load_key("sender").index, 1)

    def test_invalid_config_file(self):
        """Test that malformed sidecars are reported, not trusted."""
        self.store.config_file.write_text("{not json")
        with self.assertRaises(DecodeError):
            self.store.load_config()
        self.store.config_file.write_text(json.dumps({"instantiation": "graphene_ae", "n": "16"}))
        with self.assertRaises(InvalidConfigError):
            self.store.load_config()

    def test_tables_round_trip(self):
        """Test saving and loading a precomputed window."""
        _, table = ootable.precompute(self.root, self.config)
        table.take_enc(1)
        path = self.store.save_table(table)
        self.assertEqual(path.name, "window_1.got")
        loaded = self.store.load_table(1)
        self.assertEqual(loaded.enc_entries, table.enc_entries)
        self.assertEqual(loaded.mac_entries, table.mac_entries)

    def test_load_tables_in_window_order(self):
        """Test that every stored window loads sorted by start index."""
        config = InstantiationConfig.preset(Instantiation.GRAPHENE_POLY, n=4)
        keys = keychain.kg(config, seed=b"order")
        for _ in range(3):
            keys, table = ootable.precompute(keys, config)
            self.store.save_table(table)
        (self.home / "window_x.got").write_bytes(b"")
        self.assertEqual([t.start_index for t in self.store.load_tables()], [1, 5, 9])

    def test_sync_tables(self):
        """Test that consumed tables are deleted and partly consumed ones rewritten."""
        config = InstantiationConfig.preset(Instantiation.GRAPHENE_POLY, n=2)
        keys, first = ootable.precompute(keychain.kg(config, seed=b"sync"), config)
        keys, second = ootable.precompute(keys, config)
        for table in (first, second):
            self.store.save_table(table)
        for j in (1, 2):
            first.take_enc(j)
            first.take_mac(j)
        second.take_enc(3)
        self.store.sync_tables([first, second])
        self.assertFalse(self.store.table_path(1).exists())
        reloaded = self.store.load_table(3)
        self.assertIsNone(reloaded.enc_entries[0])
        self.assertEqual(reloaded.live_bytes(), second.live_bytes())


class TestConfigDict(unittest.TestCase):
    def test_round_trip(self):
        """Test that every config field survives the JSON form."""
        config = InstantiationConfig(Instantiation.GRAPHENE_POLY, n=8, kappa=256, b_enc_oo=True, b_mac_oo=True,
                                     b_agg=AggMode.HASH, max_msg_len=64, poly_per_index_r=True)
        data = config_to_dict(config)
        self.assertEqual(data["instantiation"], "graphene_poly")
        self.assertIn("timestamp", data)
        self.assertEqual(config_from_dict(json.loads(json.dumps(data))), config)


class TestDefaultHome(unittest.TestCase):
    def test_environment_override(self):
        """Test that GRAPHENE_HOME wins over the platform directory."""
        with patch.dict(os.environ, {ENV_HOME: "/tmp/graphene-test-home"}):
            self.assertEqual(default_home(), Path("/tmp/graphene-test-home"))

    def test_appdirs_fallback(self):
        """Test the per-user data directory from appdirs."""
        env = {k: v for k, v in os.environ.items() if k != ENV_HOME}
        with patch.dict(os.environ, env, clear=True), \
                patch("graphene_faae.storage.appdirs.user_data_dir", return_value="/tmp/graphene-appdirs") as data_dir:
            self.assertEqual(default_home(), Path("/tmp/graphene-appdirs"))
        data_dir.assert_called_once_with("graphene_faae")


if __name__ == '__main__':
    unittest.main()
