"""
``qemforge`` console script.

Configures standalone settings when no Django project is around and hands
over to Django's command dispatcher, so ``qemforge simulate ...`` and
``django-admin simulate ...`` inside a project behave the same.
"""

import sys

from django.core.management import execute_from_command_line

from .settings import ensure_configured


def main(argv=None):
    ensure_configured()
    argv = list(sys.argv if argv is None else ["qemforge", *argv])
    execute_from_command_line(argv)


if __name__ == "__main__":
    main()
