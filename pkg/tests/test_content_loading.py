from __future__ import annotations

import unittest
from pathlib import Path
from unittest.mock import patch

from steamnet import content
from steamnet.errors import ConfigError


class ContentLoadingTests(unittest.TestCase):
    def test_load_json_reads_files_as_utf8(self) -> None:
        with patch.object(Path, "exists", return_value=True), patch.object(
            Path,
            "read_text",
            autospec=True,
            return_value='{"ok": true}',
        ) as mock_read:
            data = content._load_json(Path("dummy.json"), {})

        self.assertEqual(data, {"ok": True})
        _, kwargs = mock_read.call_args
        self.assertEqual(kwargs.get("encoding"), "utf-8-sig")

    def test_missing_file_returns_fallback(self) -> None:
        self.assertEqual(content._load_json(Path("/nonexistent/steam.json"), []), [])

    def test_bundled_presets_are_listed(self) -> None:
        presets = content.available_presets()
        for name in ("step", "periodic", "oracle"):
            self.assertIn(name, presets)

    def test_experiment_numbered_names_resolve_to_presets(self) -> None:
        for alias, name in (("step-5.1", "step"), ("periodic-5.2", "periodic"), ("oracle-5.3", "oracle")):
            self.assertEqual(content.load_preset(alias), content.load_preset(name))
            self.assertIn(alias, content.available_presets())

    def test_unknown_preset_names_the_available_ones(self) -> None:
        with self.assertRaises(ConfigError) as ctx:
            content.load_preset("step-9.9")
        self.assertIn("step", str(ctx.exception))
        self.assertEqual(ctx.exception.field, "preset")

    def test_saturation_table_columns_line_up(self) -> None:
        table = content.load_saturation_table()
        lengths = {len(table[name]) for name in ("p_kPa", "T_s_C", "v_w_m3kg", "v_s_m3kg", "h_w_kJkg", "h_s_kJkg")}
        self.assertEqual(len(lengths), 1)
        self.assertGreaterEqual(lengths.pop(), 20)
        self.assertEqual(table["p_kPa"], sorted(table["p_kPa"]))


if __name__ == "__main__":
    unittest.main()
