""" This file is automatically generated by distutils. """

# Follow PEP-0396 rationale
version_info = (1, 0, 0, 'g0000000')
__version__ = '1.0.0'
