"""
Command-line tests: synth -> pipeline -> train -> identify / eval

Runs app.main in-process on a small synthetic cohort and checks outputs
and exit codes.
"""

import csv
import io
import json
import os
import shutil
import sys
import tempfile
import unittest
from unittest.mock import patch

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import app

COHORT_FLAGS = ["--subjects", "3", "--sessions", "2", "--duration-s", "30",
                "--noise-sigma", "0.05", "--wavelet-levels", "1", "--seed", "4", "-q"]


def run_cli(*argv):
    """Run the CLI, returning (exit code, stdout text)."""
    with patch('sys.stdout', new_callable=io.StringIO) as out:
        code = app.main(list(argv))
    return code, out.getvalue()


class TestCommandLine(unittest.TestCase):
    """End-to-end runs of each subcommand"""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp()
        cls.data = os.path.join(cls.tmp, "data")
        cls.features = os.path.join(cls.tmp, "features.csv")
        cls.model = os.path.join(cls.tmp, "model.txt")
        cls.synth_code, _ = run_cli("synth", "--out", cls.data, *COHORT_FLAGS)
        cls.pipeline_code, _ = run_cli("pipeline", cls.data, "--out", cls.features, *COHORT_FLAGS)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    def test_synth(self):
        """Test that synth writes logs, truth files and a manifest"""
        self.assertEqual(self.synth_code, 0)
        names = os.listdir(self.data)
        self.assertIn("manifest.json", names)
        self.assertIn("S03__s2.csv", names)
        self.assertIn("S03__s2.truth.csv", names)

    def test_pipeline(self):
        """Test the features CSV written from the cohort logs"""
        self.assertEqual(self.pipeline_code, 0)
        with open(self.features, encoding="utf-8") as f:
            rows = list(csv.reader(f))
        self.assertEqual(len(rows[0]), 291)
        self.assertGreater(len(rows), 1)
        self.assertEqual({r[0] for r in rows[1:]}, {"S01", "S02", "S03"})

    def test_pipeline_skips_undecodable_log(self):
        """Test that a log that is not UTF-8 text is skipped, not fatal"""
        data = os.path.join(self.tmp, "mixed")
        shutil.copytree(self.data, data)
        with open(os.path.join(data, "S99__bad.csv"), "wb") as f:
            f.write(b"\xff\xfe\x00t\x00_\x00m\x00s\x00\n")
        features = os.path.join(self.tmp, "mixed.csv")
        code, _ = run_cli("pipeline", data, "--out", features, *COHORT_FLAGS)
        self.assertEqual(code, 0)
        with open(features, encoding="utf-8") as f:
            rows = list(csv.reader(f))
        self.assertEqual({r[0] for r in rows[1:]}, {"S01", "S02", "S03"})

    def test_pipeline_dump_dir(self):
        """Test the per-session signal and cycle start dumps"""
        dump = os.path.join(self.tmp, "dump")
        features = os.path.join(self.tmp, "dumped.csv")
        code, _ = run_cli("pipeline", self.data, "--out", features, "--dump-dir", dump, *COHORT_FLAGS)
        self.assertEqual(code, 0)
        names = sorted(os.listdir(dump))
        self.assertEqual(len(names), 12)
        with open(os.path.join(dump, "S02__s1.signal.csv"), encoding="utf-8") as f:
            self.assertEqual(f.readline().strip(), "t_ms,z,xy,m")
        with open(os.path.join(dump, "S02__s1.starts.csv"), encoding="utf-8") as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["index", "t_ms", "z_value"])
        self.assertGreater(len(rows), 5)

    def test_train_and_identify(self):
        """Test that a gallery model recognises the sessions it was built from"""
        code, _ = run_cli("train", self.features, "--model", self.model, "--scheme", "knn", *COHORT_FLAGS)
        self.assertEqual(code, 0)
        with open(self.model, encoding="utf-8") as f:
            self.assertEqual(f.readline().strip(), "GAITMODEL 1")

        code, out = run_cli("identify", self.data, "--model", self.model, *COHORT_FLAGS)
        self.assertEqual(code, 0)
        rows = list(csv.reader(io.StringIO(out)))
        self.assertEqual(rows[0], ["session_id", "subject_id", "predicted"])
        self.assertEqual(len(rows), 7)
        for session_id, subject_id, predicted in rows[1:]:
            self.assertEqual(predicted, subject_id)

    def test_eval_report(self):
        """Test the evaluation report and ROC CSV"""
        report = os.path.join(self.tmp, "report.json")
        roc = os.path.join(self.tmp, "roc.csv")
        code, _ = run_cli("eval", self.features, "--out", report, "--roc", roc, "--scheme", "knn", *COHORT_FLAGS)
        self.assertEqual(code, 0)
        with open(report, encoding="utf-8") as f:
            payload = json.load(f)
        self.assertEqual(payload["scheme"], "knn")
        self.assertIn("eer", payload["verification"]["pattern"])
        self.assertIn("session_accuracy", payload["identification"])
        with open(roc, encoding="utf-8") as f:
            self.assertEqual(f.readline().strip(), "threshold,far,frr")

    def test_eval_to_stdout(self):
        """Test that the report goes to stdout without --out"""
        code, out = run_cli("eval", self.features, "--scheme", "knn", *COHORT_FLAGS)
        self.assertEqual(code, 0)
        self.assertIn("config_digest", json.loads(out))


class TestExitCodes(unittest.TestCase):
    """Test error handling and exit codes"""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def test_unknown_command(self):
        """Test usage errors exit with 1"""
        self.assertEqual(run_cli("dance")[0], 1)

    def test_bad_choice(self):
        """Test that an unknown scheme is a usage error"""
        self.assertEqual(run_cli("eval", self.tmp, "--scheme", "forest")[0], 1)

    def test_invalid_config_value(self):
        """Test that an out-of-range flag value is a configuration error"""
        self.assertEqual(run_cli("synth", "--out", self.tmp, "--n-s", "3", "-q")[0], 1)

    def test_eval_without_inputs(self):
        """Test that eval needs inputs unless running the disorientation study"""
        self.assertEqual(run_cli("eval", "-q")[0], 1)

    def test_missing_input(self):
        """Test that a missing input path is a data error"""
        missing = os.path.join(self.tmp, "absent.csv")
        self.assertEqual(run_cli("pipeline", missing, "-q")[0], 2)

    def test_all_logs_fail(self):
        """Test that unreadable logs only is a data error"""
        with open(os.path.join(self.tmp, "S01__s1.csv"), "w", encoding="utf-8") as f:
            f.write("not,a,log\n")
        self.assertEqual(run_cli("pipeline", self.tmp, "-q")[0], 2)

    def test_bad_model_file(self):
        """Test that a foreign model file is a data error"""
        model = os.path.join(self.tmp, "model.txt")
        with open(model, "w", encoding="utf-8") as f:
            f.write("HELLO\n")
        with open(os.path.join(self.tmp, "S01__s1.csv"), "w", encoding="utf-8") as f:
            f.write("t_ms,sensor,x,y,z\n")
        self.assertEqual(run_cli("identify", self.tmp, "--model", model, "-q")[0], 2)


if __name__ == '__main__':
    unittest.main()
