"""Reflect kit package.

Orchestration kit for reflective LLM agents that build, summarize and
consume a constitution of categorized rules while solving tasks in text
environments.
"""

import logging

logging.getLogger(__name__).addHandler(logging.NullHandler())
