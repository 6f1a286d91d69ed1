from evl_lab.cli import cli

cli()
