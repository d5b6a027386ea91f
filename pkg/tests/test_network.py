from __future__ import annotations

import random
import unittest

import numpy as np

from steamnet.errors import NetworkError
from steamnet.network import (
    Link,
    Network,
    Vertex,
    incidence_matrix,
    kirchhoff_matrix,
    random_connected_network,
    require_valid,
    spanning_tree_links,
    subspace_analysis,
    two_site_network,
    validate,
)


class IncidenceMatrixTests(unittest.TestCase):
    def test_two_site_incidence(self) -> None:
        R = incidence_matrix(two_site_network())
        np.testing.assert_array_equal(R, [[1.0], [-1.0]])

    def test_columns_sum_to_zero(self) -> None:
        net = random_connected_network(random.Random(3), 7, chords=4)
        R = incidence_matrix(net)
        np.testing.assert_array_equal(R.sum(axis=0), np.zeros(net.m))
        np.testing.assert_array_equal(np.abs(R).sum(axis=0), 2 * np.ones(net.m))


class SubspaceTests(unittest.TestCase):
    def test_dimensions_on_random_connected_graphs(self) -> None:
        rng = random.Random(2024)
        for _ in range(50):
            n = rng.randint(2, 9)
            net = random_connected_network(rng, n, chords=rng.randint(0, 4))
            R = incidence_matrix(net)
            report = subspace_analysis(R)

            self.assertEqual(report.rank, n - 1)
            self.assertEqual(report.dim_ker_R, net.m - n + 1)
            self.assertEqual(report.dim_ker_Rt, 1)
            self.assertFalse(report.ambiguous)
            ones = report.cokernel_basis[:, 0] * np.sign(report.cokernel_basis[0, 0])
            np.testing.assert_allclose(ones, np.ones(n) / np.sqrt(n), atol=1e-10)
            if report.dim_ker_R:
                np.testing.assert_allclose(R @ report.loop_basis, 0.0, atol=1e-10)

            sigma = [rng.uniform(0.1, 10.0) for _ in range(net.m)]
            K = kirchhoff_matrix(R, sigma)
            np.testing.assert_allclose(K, K.T, atol=1e-12)
            np.testing.assert_allclose(K @ np.ones(n), 0.0, atol=1e-10)
            self.assertEqual(np.linalg.matrix_rank(K), n - 1)

    def test_kirchhoff_rejects_nonpositive_weights(self) -> None:
        R = incidence_matrix(two_site_network())
        with self.assertRaises(NetworkError):
            kirchhoff_matrix(R, [0.0])
        with self.assertRaises(NetworkError):
            kirchhoff_matrix(R, [1.0, 2.0])


class ValidationTests(unittest.TestCase):
    def test_two_site_is_valid(self) -> None:
        self.assertEqual(validate(two_site_network()), [])

    def test_parallel_links_are_allowed(self) -> None:
        net = Network((Vertex("a"), Vertex("b")), (Link("x", "a", "b"), Link("y", "b", "a")))
        self.assertEqual(validate(net), [])
        self.assertEqual(subspace_analysis(incidence_matrix(net)).dim_ker_R, 1)

    def test_self_loop_unknown_vertex_and_disconnection(self) -> None:
        net = Network(
            (Vertex("a"), Vertex("b"), Vertex("c")),
            (Link("loop", "a", "a"), Link("ghost", "a", "z")),
        )
        kinds = {p["kind"] for p in validate(net)}
        self.assertEqual(kinds, {"self_loop", "unknown_vertex", "disconnected"})
        with self.assertRaises(NetworkError) as ctx:
            require_valid(net)
        self.assertIn("loop", str(ctx.exception))

    def test_duplicate_labels(self) -> None:
        net = Network((Vertex("a"), Vertex("a")), (Link("x", "a", "a"),))
        kinds = {p["kind"] for p in validate(net)}
        self.assertIn("duplicate_vertex", kinds)


class SpanningTreeTests(unittest.TestCase):
    def test_spanning_tree_has_n_minus_one_links(self) -> None:
        net = random_connected_network(random.Random(11), 8, chords=5)
        tree = spanning_tree_links(net)
        self.assertEqual(len(tree), net.n - 1)
        self.assertEqual(subspace_analysis(incidence_matrix(net)[:, tree]).rank, net.n - 1)


def triangle_network() -> Network:
    return Network(
        (Vertex("1"), Vertex("2"), Vertex("3")),
        (Link("1-2", "1", "2"), Link("2-3", "2", "3"), Link("1-3", "1", "3")),
    )


class SmallNetworkTests(unittest.TestCase):
    def test_triangle_incidence(self) -> None:
        R = incidence_matrix(triangle_network())
        np.testing.assert_array_equal(R, [[1, 0, 1], [-1, 1, 0], [0, -1, -1]])

    def test_triangle_kirchhoff_spectrum(self) -> None:
        K = kirchhoff_matrix(incidence_matrix(triangle_network()), np.eye(3))
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(K)), [0.0, 3.0, 3.0], atol=1e-12)

    def test_triangle_loop_basis(self) -> None:
        report = subspace_analysis(incidence_matrix(triangle_network()))
        self.assertEqual(report.dim_ker_R, 1)
        loop = report.loop_basis[:, 0] / report.loop_basis[0, 0]
        np.testing.assert_allclose(loop, [1.0, 1.0, -1.0], atol=1e-12)

    def test_path_image_dimensions(self) -> None:
        names = ["a", "b", "c", "d"]
        net = Network(
            tuple(Vertex(x) for x in names),
            tuple(Link(f"{x}{y}", x, y) for x, y in zip(names, names[1:])),
        )
        report = subspace_analysis(incidence_matrix(net))
        self.assertEqual(report.dim_im_Rt, 3)
        self.assertEqual(report.dim_im_R, 3)
        self.assertEqual(report.dim_ker_R, 0)
        self.assertEqual(report.dim_ker_Rt, 1)

    def test_two_site_kirchhoff(self) -> None:
        K = kirchhoff_matrix(incidence_matrix(two_site_network()), [1.0])
        np.testing.assert_array_equal(K, [[1.0, -1.0], [-1.0, 1.0]])


if __name__ == "__main__":
    unittest.main()
