from deepprior.cli import main

main()
