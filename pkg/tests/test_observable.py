"""Tests for observable assembly and parity defect weights."""

import numpy as np
import pytest

from parity_bounds.domain.exceptions import CapacityError, ValidationError
from parity_bounds.domain.linalg import operator_norm
from parity_bounds.domain.models import ObservableFamily
from parity_bounds.domain.observable import (
    assemble_b,
    defect_report,
    defect_weight,
    even_subset_sum,
    extend_observable,
    local_pair_norms,
    mixed_term_parity_expansion,
    term_operator,
)
from parity_bounds.domain.policy import numeric_policy


class TestObservableFamily:
    """Test family construction and validation."""

    def test_rejects_non_contraction(self, pauli):
        """Test that the offending norm is named in the error."""
        with pytest.raises(ValidationError, match="1.5"):
            ObservableFamily.from_terms((2,), [[1.5 * pauli["Z"]]])

    def test_rejects_non_hermitian(self):
        """Test that non-Hermitian local operators are rejected."""
        raising = np.array([[0, 1], [0, 0]], dtype=np.complex128)
        with pytest.raises(ValidationError, match="not Hermitian"):
            ObservableFamily.from_terms((2,), [[raising]])

    def test_rejects_wrong_dimension(self, pauli):
        """Test that a factor must match its site dimension."""
        with pytest.raises(ValidationError, match="site 1 has dim 3"):
            ObservableFamily.from_terms((2, 3), [[pauli["X"], pauli["X"]]])

    def test_rejects_empty_family(self):
        """Test that at least one term is needed."""
        with pytest.raises(ValidationError):
            ObservableFamily.from_terms((2,), [])

    def test_site_operators(self, chsh):
        """Test the per-site view of the table."""
        assert chsh.n == 2
        assert chsh.m == 4
        assert len(chsh.site_operators(1)) == 4


class TestAssembly:
    """Test dense assembly of u_i and B."""

    def test_term_operator(self, tripartite_family, pauli):
        """Test that u_i is the Kronecker product of row i."""
        expected = np.kron(np.kron(pauli["Z"], pauli["Z"]), pauli["Z"])
        assert np.allclose(term_operator(tripartite_family, 2), expected)

    def test_term_operator_out_of_range(self, tripartite_family):
        """Test that term indices are checked."""
        with pytest.raises(ValidationError):
            term_operator(tripartite_family, 3)

    def test_assemble_b_is_hermitian(self, tripartite_family):
        """Test that B is Hermitian and sums the terms."""
        b = assemble_b(tripartite_family)
        assert np.allclose(b, b.conj().T)
        total = sum(term_operator(tripartite_family, i) for i in range(3))
        assert np.allclose(b, total)

    def test_assemble_b_respects_capacity(self, pauli_site_4):
        """Test that assembly honours the dimension cap."""
        with numeric_policy(max_dim=8):
            with pytest.raises(CapacityError):
                assemble_b(pauli_site_4)


class TestEvenSubsetSum:
    """Test the even-parity subset sum."""

    def test_single_site(self):
        """Test that only the empty subset counts for one site."""
        assert even_subset_sum([3.0], [5.0]) == pytest.approx(5.0)

    def test_two_sites(self):
        """Test a0 a1 + c0 c1."""
        assert even_subset_sum([2.0, 3.0], [5.0, 7.0]) == pytest.approx(35.0 + 6.0)

    def test_three_sites(self):
        """Test the four even subsets of three sites."""
        c, a = [1.0, 2.0, 3.0], [4.0, 5.0, 6.0]
        expected = a[0] * a[1] * a[2] + c[0] * c[1] * a[2] + c[0] * a[1] * c[2] + a[0] * c[1] * c[2]
        assert even_subset_sum(c, a) == pytest.approx(expected)

    def test_length_mismatch(self):
        """Test that vectors of different length are rejected."""
        with pytest.raises(ValidationError):
            even_subset_sum([1.0], [1.0, 2.0])


class TestDefectWeights:
    """Test phi_ij and the denominator on the known families."""

    def test_tripartite_weights(self, tripartite_family):
        """Test phi_12 = phi_13 = 0, phi_23 = 2 and M = 5."""
        # Act
        report = defect_report(tripartite_family, compute_exact=True)

        # Assert
        assert report.phi[0, 1] == pytest.approx(0.0, abs=1e-12)
        assert report.phi[0, 2] == pytest.approx(0.0, abs=1e-12)
        assert report.phi[1, 2] == pytest.approx(2.0)
        assert report.denominator == pytest.approx(5.0)
        assert report.exact_norm_sq == pytest.approx(5.0)
        assert report.bound_satisfied is True
        assert report.slack == pytest.approx(0.0, abs=1e-9)

    def test_tripartite_local_norms(self, tripartite_family):
        """Test the local norms behind phi_23."""
        comm, anti = local_pair_norms(tripartite_family, 1, 2)
        assert np.allclose(comm, [2.0, 2.0, 0.0])
        assert np.allclose(anti, [0.0, 0.0, 2.0])

    def test_chsh(self, chsh):
        """Test that CHSH has M = 8 and the bound is tight."""
        report = defect_report(chsh, compute_exact=True)
        assert report.phi[0, 3] == pytest.approx(2.0)
        assert report.phi[1, 2] == pytest.approx(2.0)
        assert report.phi[0, 1] == pytest.approx(0.0, abs=1e-12)
        assert report.denominator == pytest.approx(8.0)
        assert report.exact_norm_sq == pytest.approx(8.0)

    def test_pauli_site_parity(self, pauli_site_3, pauli_site_4):
        """Test that odd n gives M = 3 and even n gives M = 9."""
        assert defect_report(pauli_site_3).denominator == pytest.approx(3.0)
        assert defect_report(pauli_site_4).denominator == pytest.approx(9.0)

    def test_without_exact(self, chsh):
        """Test that the exact norm is skipped by default."""
        report = defect_report(chsh)
        assert report.exact_norm_sq is None
        assert report.bound_satisfied is None
        assert report.slack is None

    def test_symmetric_in_pair(self, make_family):
        """Test that swapping the two terms leaves phi unchanged."""
        # Arrange
        fam = make_family((2, 3, 2), 2)
        swapped = ObservableFamily.from_terms(fam.dims, [fam.ops[1], fam.ops[0]])

        # Act
        forward = local_pair_norms(fam, 0, 1)
        backward = local_pair_norms(fam, 1, 0)

        # Assert
        np.testing.assert_allclose(forward[0], backward[0], atol=1e-12)
        np.testing.assert_allclose(forward[1], backward[1], atol=1e-12)
        assert defect_weight(swapped, 0, 1) == pytest.approx(defect_weight(fam, 0, 1), abs=1e-12)

    def test_pair_order_enforced(self, chsh):
        """Test that defect_weight requires i < j."""
        with pytest.raises(ValidationError, match="i < j"):
            defect_weight(chsh, 2, 1)

    def test_phi_is_read_only(self, chsh):
        """Test that the report table cannot be mutated."""
        report = defect_report(chsh)
        with pytest.raises(ValueError):
            report.phi[0, 1] = 1.0


class TestParityExpansion:
    """Test the even-parity expansion of the mixed products."""

    def test_matches_anticommutator_of_terms(self, make_family):
        """Test u_i u_j + u_j u_i against the expansion on a 2 x 3 x 2 family."""
        # Arrange
        fam = make_family((2, 3, 2), 3)
        u0, u2 = term_operator(fam, 0), term_operator(fam, 2)

        # Act
        expansion = mixed_term_parity_expansion(fam, 0, 2)

        # Assert
        assert np.allclose(expansion, u0 @ u2 + u2 @ u0, atol=1e-12)

    def test_weight_bounds_expansion_norm(self, make_family):
        """Test ||u_i u_j + u_j u_i|| <= phi_ij."""
        fam = make_family((2, 2, 2), 2)
        assert operator_norm(mixed_term_parity_expansion(fam, 0, 1)) <= defect_weight(
            fam, 0, 1
        ) + 1e-12


class TestExtendObservable:
    """Test appending identity sites."""

    def test_extension_keeps_denominator(self, chsh):
        """Test that identity sites leave every phi unchanged."""
        extended = extend_observable(chsh, [3])
        assert extended.dims == (2, 2, 3)
        assert defect_report(extended).denominator == pytest.approx(8.0)

    def test_extension_is_b_tensor_identity(self, chsh):
        """Test that the extended observable is B (x) I."""
        extended = extend_observable(chsh, [2])
        assert np.allclose(assemble_b(extended), np.kron(assemble_b(chsh), np.eye(2)))

    def test_extension_needs_sites(self, chsh):
        """Test that an empty extension is rejected."""
        with pytest.raises(ValidationError):
            extend_observable(chsh, [])


@pytest.mark.slow
class TestNormBoundProperty:
    """Property suite for ||B||^2 <= m + sum phi."""

    def test_random_families(self, rng, make_family):
        """Test the norm bound on 200 random families."""
        shapes = [(2, 2), (2, 3), (2, 2, 2), (3, 2, 2), (2, 2, 2, 2)]
        for trial in range(200):
            dims = shapes[trial % len(shapes)]
            m = int(rng.integers(1, 6))
            report = defect_report(make_family(dims, m), compute_exact=True)
            assert report.exact_norm_sq <= report.denominator + 1e-9
            assert report.bound_satisfied


@pytest.mark.slow
class TestParityIdentityProperty:
    """Property suite for the even-parity expansion of u_i u_j + u_j u_i."""

    def test_random_families_all_pairs(self, rng, make_family):
        """Test the expansion on every pair of 200 random families."""
        for _ in range(200):
            n = int(rng.integers(1, 4))
            dims = tuple(int(d) for d in rng.integers(2, 4, size=n))
            m = int(rng.integers(2, 5))
            fam = make_family(dims, m)
            terms = [term_operator(fam, i) for i in range(m)]
            for i in range(m):
                for j in range(i + 1, m):
                    expected = terms[i] @ terms[j] + terms[j] @ terms[i]
                    np.testing.assert_allclose(
                        mixed_term_parity_expansion(fam, i, j), expected, rtol=0, atol=1e-12
                    )
