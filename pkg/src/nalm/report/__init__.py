from .behavior import Appliance, BehaviorModel, BehaviorModelError, Home, Usage, User, build_model
from .interchange import deserialize_model, serialize_model
from .render import (NO_ACTIVITY, ReportTemplate, TemplateError, builtin_templates, clock, load_template,
                     render_lines, render_report)

__all__ = [
    "Appliance", "BehaviorModel", "BehaviorModelError", "Home", "Usage", "User", "build_model",
    "deserialize_model", "serialize_model",
    "NO_ACTIVITY", "ReportTemplate", "TemplateError", "builtin_templates", "clock", "load_template",
    "render_lines", "render_report",
]
