import math

import numpy as np
import pytest

from hupa.errors import (DegenerateInputError, PatternFormatError,
                         TessellationError)
from hupa.generators import GeneratorSpec, generate
from hupa.pattern import BoxDomain, PointPattern, wrap_point
from hupa.tessellation import (FaceModel, cell_statistics, circumcircle_violations,
                               delaunay, ensemble_cell_statistics, face_model,
                               load_tess, save_tess, voronoi)
from oracles import shoelace_area

SQRT3 = math.sqrt(3.0)


def make_pattern(points, lengths):
    return PointPattern(points=np.asarray(points, dtype=float),
                        box=BoxDomain(lengths=tuple(lengths)))


def poisson(box, rho, seed):
    return generate(GeneratorSpec(kind="poisson", box=BoxDomain(lengths=box),
                                  seed=seed, params={"intensity": rho}))


def lattice(box, kind, spacing=1.0, seed=0):
    return generate(GeneratorSpec(kind="lattice", box=BoxDomain(lengths=box),
                                  seed=seed,
                                  params={"lattice_kind": kind, "spacing": spacing}))


def triangle_corners(model, face):
    lengths = np.asarray(model.lengths)
    return np.array([model.vertices[i] + np.asarray(off) * lengths
                     for i, off in face.corners])


class TestDelaunayStructure:
    def test_counts_and_euler(self, poisson32):
        tri = delaunay(poisson32)
        n = len(poisson32)
        assert tri.n_faces == 2 * n
        assert tri.n_edges == 3 * n
        assert tri.n_vertices - tri.n_edges + tri.n_faces == 0

    def test_areas_tile_the_box(self, poisson32):
        tri = delaunay(poisson32)
        assert math.isclose(float(tri.areas.sum()), poisson32.box.volume,
                            rel_tol=1e-9)

    def test_empty_circumcircles(self, poisson32):
        assert circumcircle_violations(delaunay(poisson32)) == 0

    def test_triangular_lattice_equilateral(self):
        pat = lattice((8.0, 8.0 * SQRT3 / 2.0), "triangular")
        tri = delaunay(pat)
        assert tri.n_faces == 2 * len(pat)
        target = SQRT3 / 4.0
        assert np.all(np.abs(tri.areas - target) <= 1e-9)
        # every edge has unit length
        pts = pat.points
        lengths = np.asarray(pat.box.lengths)
        for ia, ib, delta in tri.edge_keys():
            d = pts[ib] + np.asarray(delta) * lengths - pts[ia]
            assert math.isclose(math.hypot(*d), 1.0, abs_tol=1e-9)

    def test_square_lattice_cocircular_still_valid(self):
        # every quad of a square lattice is cocircular; tie-breaking must
        # still deliver a structurally valid triangulation
        pat = lattice((8.0, 8.0), "square")
        tri = delaunay(pat)
        assert tri.n_faces == 2 * len(pat)
        assert np.all(np.abs(tri.areas - 0.5) <= 1e-12)
        assert circumcircle_violations(tri) == 0

    def test_triangle_geometry_matches_stored_areas(self, poisson32):
        tri = delaunay(poisson32)
        model = face_model(tri)
        for face in model.faces:
            poly = triangle_corners(model, face)
            assert math.isclose(abs(shoelace_area(poly)), face.area,
                                rel_tol=1e-9)

    def test_circumcenter_equidistant_from_triangle_vertices(self, poisson32):
        tri = delaunay(poisson32)
        model = face_model(tri)
        for t, face in enumerate(model.faces[:50]):
            poly = triangle_corners(model, face)
            cc = tri.circumcenters[t]
            dists = np.hypot(*(poly - cc).T)
            assert np.allclose(dists, tri.circumradii[t], rtol=1e-9)

    def test_permutation_invariance(self):
        pat = poisson((16.0, 16.0), 1.0, seed=41)
        rng = np.random.default_rng(5)
        perm = rng.permutation(len(pat))
        shuffled = make_pattern(pat.points[perm], pat.box.lengths)

        def geometric_keys(tri):
            centers = wrap_point(tri.circumcenters, tri.pattern.box)
            return sorted(zip(np.round(centers[:, 0], 6),
                              np.round(centers[:, 1], 6),
                              np.round(tri.areas, 6)))

        assert geometric_keys(delaunay(pat)) == geometric_keys(delaunay(shuffled))

    def test_rejects_small_or_wrong_inputs(self):
        with pytest.raises(TessellationError):
            delaunay(make_pattern([[1.0, 1.0], [2.0, 2.0]], (5.0, 5.0)))
        with pytest.raises(TessellationError):
            delaunay(make_pattern([[1.0, 1.0, 1.0]] , (5.0, 5.0, 5.0)))

    def test_rejects_coincident_points(self):
        pts = [[1.0, 1.0], [3.0, 2.0], [1.0, 1.0], [4.0, 4.0]]
        with pytest.raises(DegenerateInputError):
            delaunay(make_pattern(pts, (5.0, 5.0)))

    def test_too_sparse_for_box(self):
        pts = [[50.0, 50.0], [50.5, 50.0], [50.0, 50.5]]
        with pytest.raises(TessellationError):
            delaunay(make_pattern(pts, (100.0, 100.0)))


class TestVoronoi:
    def test_single_point(self):
        tess = voronoi(make_pattern([[2.0, 3.0]], (5.0, 5.0)))
        assert len(tess.cells) == 1
        cell = tess.cells[0]
        assert math.isclose(cell.area, 25.0, rel_tol=1e-12)
        assert cell.sides == 4
        assert cell.neighbors == (0, 0, 0, 0)

    def test_two_points_equal_halves(self):
        tess = voronoi(make_pattern([[1.0, 2.0], [4.0, 2.0]], (6.0, 4.0)))
        assert len(tess.cells) == 2
        for cell in tess.cells:
            assert math.isclose(cell.area, 12.0, rel_tol=1e-9)
            assert cell.sides == 4
        # vertical sides face the other point; the cell spans the full box
        # height, so top and bottom wrap onto the cell itself
        assert sorted(tess.cells[0].neighbors) == [0, 0, 1, 1]

    def test_empty_pattern(self):
        with pytest.raises(DegenerateInputError):
            voronoi(make_pattern(np.empty((0, 2)), (4.0, 4.0)))

    def test_two_coincident_points(self):
        with pytest.raises(DegenerateInputError):
            voronoi(make_pattern([[1.0, 1.0], [1.0, 1.0]], (4.0, 4.0)))

    def test_areas_tile_the_box(self, poisson32):
        tess = voronoi(poisson32)
        total = sum(c.area for c in tess.cells)
        assert math.isclose(total, poisson32.box.volume, rel_tol=1e-9)

    def test_mean_sides_exactly_six(self, poisson32):
        tess = voronoi(poisson32)
        assert sum(c.sides for c in tess.cells) == 6 * len(tess.cells)
        assert tess.mean_sides == 6.0

    def test_square_lattice_unit_cells(self):
        tess = voronoi(lattice((8.0, 8.0), "square"))
        for cell in tess.cells:
            assert cell.sides == 4
            assert math.isclose(cell.area, 1.0, rel_tol=1e-9)
        stats = cell_statistics(tess)
        assert stats.cv_area == 0.0
        assert stats.side_histogram == {4: 64}

    def test_triangular_lattice_hexagons(self):
        tess = voronoi(lattice((8.0, 8.0 * SQRT3 / 2.0), "triangular"))
        target = SQRT3 / 2.0  # hexagon area at unit spacing
        for cell in tess.cells:
            assert cell.sides == 6
            assert math.isclose(cell.area, target, rel_tol=1e-9)

    def test_loop_references_match_polygon(self, poisson32):
        tess = voronoi(poisson32)
        lengths = np.asarray(poisson32.box.lengths)
        for cell in tess.cells[:40]:
            rebuilt = np.array([tess.vertices[i] + np.asarray(off) * lengths
                                for i, off in cell.loop])
            assert np.allclose(rebuilt, cell.polygon, atol=1e-9)

    def test_cell_contains_its_generator(self, poisson32):
        # generator is strictly inside its own convex cell
        tess = voronoi(poisson32)
        for cell in tess.cells:
            g = poisson32.points[cell.generator]
            poly = cell.polygon
            nxt = np.roll(poly, -1, axis=0)
            cross = ((nxt[:, 0] - poly[:, 0]) * (g[1] - poly[:, 1])
                     - (nxt[:, 1] - poly[:, 1]) * (g[0] - poly[:, 0]))
            assert np.all(cross > 0)

    def test_neighbors_are_symmetric(self, poisson32):
        tess = voronoi(poisson32)
        adj = {c.generator: set(c.neighbors) for c in tess.cells}
        for g, ns in adj.items():
            for n in ns:
                assert g in adj[n]


class TestCellStatistics:
    def test_pooled_matches_direct_computation(self, poisson32):
        tess = voronoi(poisson32)
        stats = cell_statistics(tess)
        areas = np.array([c.area for c in tess.cells])
        assert stats.n_cells == len(tess.cells)
        assert math.isclose(stats.mean_area, float(areas.mean()), rel_tol=1e-12)
        assert math.isclose(stats.cv_area,
                            float(areas.std() / areas.mean()), rel_tol=1e-12)
        assert sum(stats.side_histogram.values()) == stats.n_cells
        edges = np.concatenate(
            [np.hypot(*(np.roll(c.polygon, -1, axis=0) - c.polygon).T)
             for c in tess.cells])
        assert math.isclose(stats.mean_edge_length, float(edges.mean()),
                            rel_tol=1e-12)

    def test_ensemble_pools_cells(self):
        pats = [poisson((16.0, 16.0), 1.0, seed=s) for s in (60, 61)]
        pooled = ensemble_cell_statistics(pats)
        singles = [cell_statistics(voronoi(p)) for p in pats]
        assert pooled.n_cells == sum(s.n_cells for s in singles)
        want_mean = (sum(s.mean_area * s.n_cells for s in singles)
                     / pooled.n_cells)
        assert math.isclose(pooled.mean_area, want_mean, rel_tol=1e-12)

    def test_ensemble_rejects_empty_and_mixed(self):
        with pytest.raises(ValueError):
            ensemble_cell_statistics([])

    def test_disorder_widens_area_distribution(self):
        spec = GeneratorSpec(kind="perturbed_lattice",
                             box=BoxDomain(lengths=(16.0, 16.0)), seed=7,
                             params={"spacing": 1.0, "jitter": 0.2})
        ordered = cell_statistics(voronoi(generate(spec)))
        disordered = cell_statistics(voronoi(poisson((16.0, 16.0), 1.0, 7)))
        assert disordered.cv_area > ordered.cv_area


class TestTessIO:
    def test_round_trip_voronoi(self, poisson32, tmp_path):
        tess = voronoi(poisson32)
        path = tmp_path / "cells.tess"
        save_tess(tess, path)
        model = load_tess(path)
        assert model.rule == "voronoi"
        assert model.lengths == poisson32.box.lengths
        assert model.provenance == poisson32.provenance
        assert np.array_equal(model.vertices, tess.vertices)
        assert len(model.faces) == len(tess.cells)
        for face, cell in zip(model.faces, tess.cells):
            assert face.corners == cell.loop
            assert face.area == cell.area
            assert face.sides == cell.sides

    def test_round_trip_delaunay(self, poisson32, tmp_path):
        tri = delaunay(poisson32)
        path = tmp_path / "tri.tess"
        save_tess(tri, path)
        model = load_tess(path)
        assert model.rule == "delaunay"
        assert np.array_equal(model.vertices, poisson32.points)
        assert tuple(f.corners for f in model.faces) == tri.triangles
        assert all(f.sides == 3 for f in model.faces)

    def test_face_model_accepted_by_save(self, poisson32, tmp_path):
        model = face_model(voronoi(poisson32))
        assert isinstance(model, FaceModel)
        path = tmp_path / "model.tess"
        save_tess(model, path)
        again = load_tess(path)
        assert len(again.faces) == len(model.faces)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.tess"
        path.write_text("#something-else\n")
        with pytest.raises(PatternFormatError) as err:
            load_tess(path)
        assert err.value.line == 1

    def test_bad_header_field(self, tmp_path):
        path = tmp_path / "bad.tess"
        path.write_text("#hupa-tess v1\nrule=voronoi nonsense\nprovenance=\n")
        with pytest.raises(PatternFormatError) as err:
            load_tess(path)
        assert err.value.line == 2

    def test_unknown_rule(self, tmp_path):
        path = tmp_path / "bad.tess"
        path.write_text("#hupa-tess v1\n"
                        "rule=medial dim=2 lengths=4.,4. n_vertices=0 "
                        "n_faces=0\nprovenance=\n")
        with pytest.raises(PatternFormatError) as err:
            load_tess(path)
        assert err.value.line == 2

    def test_line_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.tess"
        path.write_text("#hupa-tess v1\n"
                        "rule=voronoi dim=2 lengths=4.,4. n_vertices=2 "
                        "n_faces=0\nprovenance=\nv 0. 0.\n")
        with pytest.raises(PatternFormatError):
            load_tess(path)

    def test_malformed_vertex_line(self, tmp_path):
        path = tmp_path / "bad.tess"
        path.write_text("#hupa-tess v1\n"
                        "rule=voronoi dim=2 lengths=4.,4. n_vertices=1 "
                        "n_faces=0\nprovenance=\nv zero 0.\n")
        with pytest.raises(PatternFormatError) as err:
            load_tess(path)
        assert err.value.line == 4

    def test_face_vertex_index_out_of_range(self, tmp_path):
        path = tmp_path / "bad.tess"
        path.write_text("#hupa-tess v1\n"
                        "rule=voronoi dim=2 lengths=4.,4. n_vertices=1 "
                        "n_faces=1\nprovenance=\nv 0. 0.\n"
                        "f 3 0 0 0 5 0 0 0 0 0 1.0 3\n")
        with pytest.raises(PatternFormatError) as err:
            load_tess(path)
        assert err.value.line == 5
