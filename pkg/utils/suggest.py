"""Fuzzy "did you mean" suggestions for diagnostics."""

from collections.abc import Iterable

from fuzzywuzzy.process import extractOne  # type: ignore  # noqa: PGH003

SUGGESTION_THRESHOLD = 60


def closest_name(name: str, candidates: Iterable[str]) -> str | None:
    """Find the candidate closest to a misspelled name.

    :param name: The name that failed to resolve.
    :type name: str
    :param candidates: Names that would have resolved.
    :type candidates: Iterable[str]
    :return: The best match, or None if nothing scores above the threshold.
    :rtype: str | None
    """
    choices = sorted(set(candidates) - {name})
    if not choices:
        return None
    match = extractOne(name, choices, score_cutoff=SUGGESTION_THRESHOLD)
    return match[0] if match else None


def with_suggestion(message: str, name: str, candidates: Iterable[str]) -> str:
    """Append a suggestion to ``message`` when one exists."""
    suggestion = closest_name(name, candidates)
    if suggestion is None:
        return message
    return f"{message} (did you mean '{suggestion}'?)"
