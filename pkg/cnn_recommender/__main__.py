from cnn_recommender.cli import main

raise SystemExit(main())
