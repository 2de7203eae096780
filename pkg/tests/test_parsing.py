"""Tests for module :mod:`~reflect_kit._parsing`."""
import pytest
from reflect_kit._parsing import (
    ErrorRecord,
    parse_list_output,
    parse_record_output,
)


class TestParseListOutput:
    """Tests for :func:`~reflect_kit._parsing.parse_list_output`."""

    @pytest.mark.parametrize(
        "text",
        [
            pytest.param('["rule A", "rule B"]', id="json"),
            pytest.param("['rule A', 'rule B']", id="python"),
            pytest.param('```json\n["rule A", "rule B"]\n```', id="fenced"),
            pytest.param(
                'Here are the rules:\n["rule A", "rule B"]\nHope it helps.',
                id="prose",
            ),
            pytest.param('["  rule A ", "rule B", "  "]', id="whitespace"),
        ],
    )
    def test_recovers_entries(self, text):
        """Test that surrounding noise does not change the entries."""
        assert parse_list_output(text).entries == ("rule A", "rule B")

    def test_skips_bracketed_prose(self):
        """Test that a non-list bracket pair before the list is skipped."""
        text = "Step [one] done. ['Close the fridge after use.']"
        result = parse_list_output(text)
        assert result.entries == ("Close the fridge after use.",)
        assert not result.failed

    def test_apostrophe_in_prose(self):
        """Test that apostrophes in words do not open a string."""
        text = "Here's what I'd keep: [\"Don't repeat actions.\"]"
        assert parse_list_output(text).entries == ("Don't repeat actions.",)

    def test_priorities(self):
        """Test that priority annotations run parallel to the entries."""
        result = parse_list_output(
            '[{"rule": "Check the goal.", "priority": 1}, '
            '{"rule": "Drop balls in the goal room.", "priority": "2"}, '
            '"Plain rule."]'
        )
        assert result.entries == (
            "Check the goal.",
            "Drop balls in the goal room.",
            "Plain rule.",
        )
        assert result.priorities == (1, 2, None)

    def test_bad_entries(self):
        """Test that non-rule items are dropped with a diagnostic."""
        result = parse_list_output('["kept", 3, {"other": "x"}]')
        assert result.entries == ("kept",)
        assert result.diagnostic.code == "bad_entry"
        assert not result.failed

    @pytest.mark.parametrize(
        "text,code",
        [
            pytest.param("", "empty", id="empty"),
            pytest.param("   \n", "empty", id="blank"),
            pytest.param("I see no mistakes.", "no_brackets", id="prose"),
            pytest.param('["never closed', "unbalanced", id="unbalanced"),
            pytest.param("[rule A, rule B]", "syntax", id="bare-words"),
        ],
    )
    def test_failures(self, text, code):
        """Test that unusable output never raises."""
        result = parse_list_output(text)
        assert result.entries == ()
        assert result.diagnostic.code == code
        assert result.failed

    def test_deep_nesting(self):
        """Test that pathologically nested output does not raise."""
        result = parse_list_output("[" * 1500 + "]" * 1500)
        assert result.entries == ()

    def test_empty_list(self):
        """Test that an empty list parses to no entries without failing."""
        result = parse_list_output("[]")
        assert result.entries == ()
        assert not result.failed


class TestParseRecordOutput:
    """Tests for :func:`~reflect_kit._parsing.parse_record_output`."""

    @pytest.mark.parametrize(
        "text",
        [
            pytest.param(
                '[{"mistake": "Moved too early", '
                '"solution": "Pick up both balls first"}]',
                id="json",
            ),
            pytest.param(
                "[{'Solution': 'Pick up both balls first', "
                "'MISTAKE': 'Moved too early'}]",
                id="keys-any-case-and-order",
            ),
            pytest.param(
                "['mistake: Moved too early; "
                "solution: Pick up both balls first']",
                id="flat-string",
            ),
            pytest.param(
                "[{'moved_too_early': 'Pick up both balls first'}]",
                id="single-key",
            ),
        ],
    )
    def test_shapes(self, text):
        """Test every accepted record shape."""
        result = parse_record_output(text)
        expected = ErrorRecord("moved too early", "Pick up both balls first")
        assert len(result.entries) == 1
        assert result.entries[0].mistake.lower() == expected.mistake
        assert result.entries[0].solution == expected.solution

    def test_malformed_records(self):
        """Test that malformed records are skipped."""
        result = parse_record_output(
            "[{'mistake': 'a', 'solution': 'b'}, {'mistake': 'c'}, 4]"
        )
        assert result.entries == (ErrorRecord("a", "b"),)
        assert result.diagnostic.code == "bad_entry"

    def test_failure(self):
        """Test that prose without a list fails softly."""
        result = parse_record_output("No errors this time.")
        assert result.entries == ()
        assert result.failed

    def test_render(self):
        """Test the single-line rendering of a record."""
        record = ErrorRecord("Opened the wrong door", "Read the goal")
        assert (
            record.render()
            == "mistake: Opened the wrong door; solution: Read the goal"
        )
