"""
Plain-text table rendering with Jinja2.

Numbers in human-readable tables use six significant digits so that runs
with the same config and seed render byte-identical tables.
"""

from typing import Any, Optional

import structlog
from jinja2 import Environment, StrictUndefined, TemplateSyntaxError, UndefinedError

logger = structlog.get_logger(__name__)


def six_digits(value: Optional[Any]) -> str:
    if value is None:
        return "-"
    return "%.6g" % value


SUMMARY_TEMPLATE = """\
run      {{ summary.method }} on {{ summary.dataset }}
repeats  {{ summary.n_ok }} ok / {{ summary.n_failed }} failed of {{ summary.repetitions }}
{% if summary.failed_repetitions %}
failed   {{ summary.failed_repetitions | join(", ") }}
{% endif %}

{{ "%-14s" | format("statistic") }}{{ "%14s" | format("mean") }}{{ "%14s" | format("q25") }}{{ "%14s" | format("q75") }}
{% for label, block in blocks %}
{{ "%-14s" | format(label) }}{% if block %}{{ "%14s" | format(block.mean | g6) }}{{ "%14s" | format(block.q25 | g6) }}{{ "%14s" | format(block.q75 | g6) }}{% else %}{{ "%14s" | format("-") }}{{ "%14s" | format("-") }}{{ "%14s" | format("-") }}{% endif %}

{% endfor %}
"""

REPORT_TEMPLATE = """\
{{ "%-14s" | format("method") }}{{ "%6s" | format("runs") }}{{ "%14s" | format("mean elbo") }}{{ "%14s" | format("q25") }}{{ "%14s" | format("q75") }}{{ "%14s" | format("mean comps") }}{{ "%12s" | format("cover@0.01") }}
{% for row in rows %}
{{ "%-14s" | format(row.method) }}{{ "%6d" | format(row.runs) }}{{ "%14s" | format(row.elbo_mean | g6) }}{{ "%14s" | format(row.elbo_q25 | g6) }}{{ "%14s" | format(row.elbo_q75 | g6) }}{{ "%14s" | format(row.components_mean | g6) }}{{ "%12s" | format(row.cover_mean | g6) }}
{% endfor %}
{% if problems %}

problems:
{% for problem in problems %}
  {{ problem }}
{% endfor %}
{% endif %}
"""


class TableRenderer:
    """Jinja2 environment for run tables: no escaping, strict variables, trimmed blocks."""

    def __init__(self):
        self.env = Environment(
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            undefined=StrictUndefined,
            keep_trailing_newline=True,
        )
        self.env.filters["g6"] = six_digits

    def render(self, template_str: str, variables: dict, template_name: str = "unknown") -> str:
        """
        Raises:
            TemplateSyntaxError: invalid template
            UndefinedError: a variable the template needs is missing
        """
        try:
            rendered = self.env.from_string(template_str).render(**variables)
        except TemplateSyntaxError as e:
            logger.error("table_template_syntax_error", template_name=template_name, error=str(e), line=e.lineno)
            raise
        except UndefinedError as e:
            logger.error("table_template_undefined_variable", template_name=template_name, error=str(e))
            raise
        logger.debug("table_rendered", template_name=template_name, rendered_length=len(rendered))
        return rendered
