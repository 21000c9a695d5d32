import numpy as np
import pytest

from clockprobe.seeding import seed_sequence, stream


class TestStreams:
    """Tests for named random streams."""

    def test_same_arguments_same_stream(self):
        """A stream is fully determined by seed, name and indices."""
        assert np.array_equal(stream(42, "readout", 3).random(5), stream(42, "readout", 3).random(5))

    def test_names_separate_streams(self):
        """Different names give unrelated draws."""
        assert not np.array_equal(stream(42, "readout").random(5), stream(42, "backaction").random(5))

    def test_indices_separate_streams(self):
        """Different indices under one name give unrelated draws."""
        assert not np.array_equal(stream(42, "cycle", 0).random(5), stream(42, "cycle", 1).random(5))

    def test_seed_separates_streams(self):
        """The master seed changes every stream."""
        assert not np.array_equal(stream(1, "readout").random(5), stream(2, "readout").random(5))

    def test_creation_order_irrelevant(self):
        """Creating other streams first does not change a stream."""
        first = stream(7, "projection", 2, 0).random(3)
        for index in range(10):
            stream(7, "projection", index, 1).random(100)
        assert np.array_equal(stream(7, "projection", 2, 0).random(3), first)

    def test_negative_values_rejected(self):
        """Seeds and indices must be non-negative."""
        with pytest.raises(ValueError):
            seed_sequence(-1, "readout")
        with pytest.raises(ValueError):
            seed_sequence(1, "readout", -2)
