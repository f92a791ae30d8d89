"""
Configuration management package for the Malware Spread Analyzer
"""

from .config_manager import ConfigurationManager

__all__ = ['ConfigurationManager']
