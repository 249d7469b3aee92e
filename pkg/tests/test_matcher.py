"""
Unit tests for gallery template matching
"""

import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from gaitauth import matcher
from gaitauth.errors import ModelError


def toy_gallery():
    return matcher.build_gallery([
        ("alice", np.array([0.0, 0.0])),
        ("alice", np.array([1.0, 0.0])),
        ("bob", np.array([5.0, 5.0])),
        ("carol", np.array([-4.0, 2.0])),
    ])


class TestGallery(unittest.TestCase):
    """Test Gallery container"""

    def test_subjects_and_dim(self):
        """Test sorted subjects and vector length"""
        g = toy_gallery()
        self.assertEqual(g.subjects, ["alice", "bob", "carol"])
        self.assertEqual(g.dim, 2)
        self.assertEqual(len(g), 4)

    def test_length_mismatch(self):
        """Test that mixed vector lengths are rejected"""
        with self.assertRaises(ModelError):
            toy_gallery().add("dave", [1.0, 2.0, 3.0])


class TestKnnVerify(unittest.TestCase):
    """Test knn_verify function"""

    def test_exact_template(self):
        """Test that a stored template scores 0"""
        self.assertEqual(matcher.knn_verify(toy_gallery(), "bob", [5.0, 5.0]), 0.0)

    def test_nearest_own_template(self):
        """Test that only the claimed subject's templates count"""
        score = matcher.knn_verify(toy_gallery(), "alice", [4.0, 4.0])
        self.assertAlmostEqual(score, -5.0)

    def test_monotone_in_distance(self):
        """Test that a farther probe scores lower"""
        g = toy_gallery()
        self.assertGreater(matcher.knn_verify(g, "bob", [6.0, 5.0]), matcher.knn_verify(g, "bob", [9.0, 5.0]))

    def test_unknown_subject(self):
        """Test that an unknown claim is an error"""
        with self.assertRaises(ModelError):
            matcher.knn_verify(toy_gallery(), "eve", [0.0, 0.0])


class TestKnnIdentify(unittest.TestCase):
    """Test knn_identify function"""

    def test_entry_itself(self):
        """Test that a stored entry identifies its subject"""
        self.assertEqual(matcher.knn_identify(toy_gallery(), [-4.0, 2.0]), "carol")

    def test_tie_goes_to_first(self):
        """Test the first-occurrence tie-break"""
        g = matcher.build_gallery([("x", np.array([1.0, 0.0])), ("y", np.array([-1.0, 0.0]))])
        self.assertEqual(matcher.knn_identify(g, [0.0, 0.0]), "x")

    def test_matches_exhaustive_scan(self):
        """Test agreement with a brute-force scan on random probes"""
        rng = np.random.default_rng(4)
        items = [(f"s{i % 5}", rng.normal(size=2)) for i in range(40)]
        g = matcher.build_gallery(items)
        for probe in rng.normal(size=(50, 2)):
            best, best_d = None, np.inf
            for subject, v in items:
                d = np.sqrt((v[0] - probe[0]) ** 2 + (v[1] - probe[1]) ** 2)
                if d < best_d:
                    best, best_d = subject, d
            self.assertEqual(matcher.knn_identify(g, probe), best)

    def test_duplicates_of_winner(self):
        """Test that duplicating the nearest subject's entries keeps the answer"""
        g = toy_gallery()
        probe = [4.0, 4.5]
        before = matcher.knn_identify(g, probe)
        g.extend([("bob", np.array([5.0, 5.0]))] * 3)
        self.assertEqual(matcher.knn_identify(g, probe), before)

    def test_empty_gallery(self):
        """Test that an empty gallery is an error"""
        with self.assertRaises(ModelError):
            matcher.knn_identify(matcher.Gallery(), [0.0])


if __name__ == '__main__':
    unittest.main()
