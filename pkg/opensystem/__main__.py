from opensystem.cli import main

raise SystemExit(main())
