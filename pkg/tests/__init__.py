# stiffmap tests
