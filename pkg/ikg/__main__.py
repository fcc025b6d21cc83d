from ikg.cli import app

app(prog_name="ikg")
