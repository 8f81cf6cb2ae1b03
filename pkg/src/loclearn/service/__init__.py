"""HTTP service exposing the library; see :func:`loclearn.service.app.create_app`."""
