"""Translations to other reasoning problems and hardness-instance generators."""
