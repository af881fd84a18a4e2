"""Versioned prompt templates for the live annotation backend."""

PROMPT_VERSION = 1

RESEARCH_PROMPT = """\
You are a literary research assistant. Research the book below using web
sources (encyclopedia entries, review aggregators, author and publisher
pages). Respond with strict JSON only, no prose, matching:

{{
  "summary": "<one-paragraph factual summary of the book, no spoilers>",
  "sources": {{"wikipedia": <bool>, "goodreads": <bool>, "other_urls": ["<url>", ...]}},
  "metadata": {{
    "avg_rating": <float 1-5 or null>,
    "num_ratings": <int or null>,
    "num_pages": <int or null>,
    "genres": ["<genre>", ...]
  }},
  "comments": ["<short reader comment>", ...]
}}

If you cannot find the book at all, respond with {{"not_found": true}}.

Title: {title}
Author: {author}
"""

CLASSIFY_PROMPT = """\
You are a precise annotator. For the text below, decide each label: 1 if the
label applies to the text, 0 if it does not. Respond with strict JSON only,
an object with exactly these keys: {labels}.

Text:
{text}
"""

CLASSIFY_MANY_PROMPT = """\
You are a precise annotator. For each numbered text below, decide each label:
1 if the label applies to that text, 0 if it does not. Respond with strict
JSON only: a list with one object per text, in order, each object having
exactly these keys: {labels}.

Texts:
{texts}
"""
