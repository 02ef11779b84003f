from sgda.cli import main

main()
